#include "rangesim/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "rangesim/detector.hpp"

namespace rangesim {

namespace {

BasebandSignal gaussian_burst(std::size_t length, double power, double sample_period,
                              std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, std::sqrt(power / 2.0));
  BasebandSignal sig;
  sig.sample_period = sample_period;
  sig.bandwidth = 1.0 / sample_period;
  sig.samples.resize(length);
  for (cplx& s : sig.samples) s = cplx(gauss(rng), gauss(rng));
  return sig;
}

}  // namespace

std::vector<TimedEmission> jam(const JammerConfig& cfg, double t_begin, double t_end,
                               double sample_period, std::uint64_t seed) {
  if (t_end < t_begin) throw std::invalid_argument("jam: empty timeline");
  if (cfg.duty_cycle <= 0.0 && cfg.mode == JammerConfig::Mode::kIntermittent) return {};

  std::mt19937_64 rng(seed);
  const auto span = static_cast<std::size_t>(std::ceil((t_end - t_begin) / sample_period));
  std::vector<TimedEmission> emissions;

  if (cfg.mode == JammerConfig::Mode::kContinuous) {
    emissions.push_back(TimedEmission{gaussian_burst(span, cfg.power, sample_period, rng), t_begin,
                                      cfg.position, 0xADu});
    return emissions;
  }

  const std::size_t pulse = std::max<std::size_t>(1, cfg.pulse_length);
  const auto n_pulses = static_cast<std::size_t>(
      std::floor(cfg.duty_cycle * static_cast<double>(span) / static_cast<double>(pulse)));
  std::uniform_int_distribution<std::size_t> start_dist(0, span > pulse ? span - pulse : 0);
  for (std::size_t i = 0; i < n_pulses; ++i) {
    const std::size_t start = start_dist(rng);
    emissions.push_back(TimedEmission{gaussian_burst(pulse, cfg.power, sample_period, rng),
                                      t_begin + static_cast<double>(start) * sample_period,
                                      cfg.position, 0xADu});
  }
  return emissions;
}

EnlargementOutcome enlargement_attack(const ReplayAttacker& attacker,
                                      const EnlargementScenario& scenario, std::uint64_t seed) {
  const ChannelConfig& ch = scenario.channel;
  const double T = ch.sample_period();

  InitiatorNode initiator{0, Position{0, 0, 0}, NodeClock{}, SharedKey::from_string("enlargement-attack-key"),
                          scenario.protocol};
  std::vector<ReflectorNode> reflectors(1);
  reflectors[0].id = 1;
  reflectors[0].position = Position{scenario.reflector_distance, 0, 0};
  assume_synchronized(initiator, reflectors, seed);

  const SessionSetup setup = prepare_session(initiator, reflectors, seed, ch);
  const auto activities = reflector_phase(setup, initiator, reflectors, ch, seed);

  EnlargementOutcome outcome;
  if (activities.empty() || !activities[0].request_detected) {
    outcome.session = initiator_phase(setup, initiator, reflectors, activities, ch, seed);
    return outcome;
  }

  // target the first response of the batch
  const TimedEmission& target = activities[0].emissions.at(0);
  const std::size_t resp_len = target.signal.size();
  const std::size_t n_rec = std::min(attacker.record_length, resp_len);

  const double tof_ra = attacker.position.distance_to(reflectors[0].position) / kSpeedOfLight;
  const PropagatedSignal at_attacker = propagate(target, attacker.position, ch);

  // recorded prefix, re-scaled to the attacker's transmit power
  std::mt19937_64 rng(seed ^ 0xA77AC4E2ULL);
  double rec_power = 0.0;
  // the attacker's capture starts at the waveform's nominal beginning
  const std::size_t lead =
      static_cast<std::size_t>(std::max<std::int64_t>(
          0, static_cast<std::int64_t>(std::llround((target.start_time + tof_ra) / T)) -
                 at_attacker.start_index));
  std::vector<cplx> recorded(n_rec, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < n_rec && lead + i < at_attacker.signal.size(); ++i)
    recorded[i] = at_attacker.signal.samples[lead + i];
  for (const cplx& s : recorded) rec_power += std::norm(s);
  rec_power /= std::max<std::size_t>(1, recorded.size());
  const double rescale = rec_power > 0.0 ? std::sqrt(attacker.jam_power / rec_power) : 0.0;

  BasebandSignal x_signal;
  x_signal.sample_period = T;
  x_signal.bandwidth = ch.sample_rate_hz;
  x_signal.samples = recorded;
  for (cplx& s : x_signal.samples) s *= rescale;

  // overshadow: from the moment the recording completes, the attacker emits the
  // recorded prefix again followed by noise until Y's tail is covered
  const double t_record_end = target.start_time + tof_ra + static_cast<double>(n_rec) * T;
  const std::size_t tail = resp_len - n_rec;
  BasebandSignal shadow = gaussian_burst(tail + n_rec, attacker.jam_power, T, rng);
  std::copy(x_signal.samples.begin(), x_signal.samples.end(), shadow.samples.begin());

  std::vector<TimedEmission> attack;
  attack.push_back(TimedEmission{shadow, t_record_end, attacker.position, 0xADu});
  const double t_replay = t_record_end + static_cast<double>(attacker.replay_delay) * T;
  attack.push_back(TimedEmission{x_signal, t_replay, attacker.position, 0xADu});

  outcome.session = initiator_phase(setup, initiator, reflectors, activities, ch, seed, attack);

  // classify detections of response 0 against ground-truth arrival times
  const double tof_ri = reflectors[0].position.distance_to(initiator.position) / kSpeedOfLight;
  const double tof_ai = attacker.position.distance_to(initiator.position) / kSpeedOfLight;
  const auto y_index = static_cast<std::int64_t>(std::llround((target.start_time + tof_ri) / T));
  const auto x_index = static_cast<std::int64_t>(std::llround((t_replay + tof_ai) / T));
  for (const ResponseRecord& rec : outcome.session.responses) {
    if (rec.response_index != 0) continue;
    if (std::llabs(rec.peak_index - y_index) <= 2) outcome.y_detected = true;
    if (std::llabs(rec.peak_index - x_index) <= 2 && x_index > y_index + 2)
      outcome.x_detected = true;
  }
  const double true_distance = scenario.reflector_distance;
  for (const ReflectorReport& rep : outcome.session.reflectors) {
    if (!rep.failed && rep.estimate &&
        rep.estimate->final > true_distance + kSpeedOfLight * T)
      outcome.enlarged_accepted = true;
  }
  for (const ResponseRecord& rec : outcome.session.responses) {
    if (rec.accepted && rec.distance > true_distance + kSpeedOfLight * T)
      outcome.enlarged_accepted = true;
  }
  return outcome;
}

std::vector<double> sniffer_estimate(const SnifferObserver& observer,
                                     const SnifferScenario& scenario, TwAssumption tw,
                                     GeometryAssumption geometry, std::size_t n_sessions,
                                     std::uint64_t seed) {
  const ChannelConfig& ch = scenario.channel;
  const double T = ch.sample_period();

  InitiatorNode initiator{0, Position{0, 0, 0}, NodeClock{}, SharedKey::from_string("sniffer-scenario-key"),
                          scenario.protocol};
  std::vector<ReflectorNode> reflectors(1);
  reflectors[0].id = 1;
  reflectors[0].position = Position{scenario.reflector_distance, 0, 0};

  std::mt19937_64 rng(seed ^ 0x5EEDF00DULL);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.14159265358979323846);
  std::uniform_real_distribution<double> radius(1.0, 30.0);

  std::vector<double> errors;
  errors.reserve(n_sessions);
  for (std::size_t s = 0; s < n_sessions; ++s) {
    const std::uint64_t epoch = seed + s;
    assume_synchronized(initiator, reflectors, epoch);
    const SessionSetup setup = prepare_session(initiator, reflectors, epoch, ch);
    const auto activities = reflector_phase(setup, initiator, reflectors, ch, epoch);
    if (activities.empty() || !activities[0].request_detected) continue;

    Position obs_pos = observer.position;
    if (geometry == GeometryAssumption::kUnknownRandom) {
      const double a = angle(rng), r = radius(rng);
      obs_pos = Position{r * std::cos(a), r * std::sin(a), 0.0};
    } else if (geometry == GeometryAssumption::kMidpoint) {
      obs_pos = Position{scenario.reflector_distance / 2.0, 0.0, 0.0};
    } else {
      obs_pos = initiator.position;
    }

    const double tof_ia = std::max(1e-12, obs_pos.distance_to(initiator.position)) / kSpeedOfLight;
    const double tof_ra = obs_pos.distance_to(reflectors[0].position) / kSpeedOfLight;
    const double tof_true = scenario.reflector_distance / kSpeedOfLight;

    // oracle energy edges at the observer position
    const auto l_q = static_cast<double>(setup.request_length());
    const auto l_p = static_cast<double>(setup.response_length());
    const double t_s_hat = (l_q - 1.0) * T + tof_ia;  // request's last symbol
    const TimedEmission& resp0 = activities[0].emissions.at(0);
    const double t_r_hat = resp0.start_time + (l_p - 1.0) * T + tof_ra;

    const double t_resp = l_p * T;
    double t_w_assumed;
    if (tw == TwAssumption::kOracle) {
      t_w_assumed = setup.waits[0][0].value;
    } else {
      t_w_assumed = 0.5 * static_cast<double>(scenario.protocol.waiting_window - 1) * T;
    }

    double estimate;
    if (geometry == GeometryAssumption::kColocatedInitiator) {
      // ToF_{R->A} collapses onto the unknown ToF itself: halve the residual
      estimate = 0.5 * (t_r_hat - t_s_hat - t_w_assumed - t_resp);
    } else {
      // the adversary assumes the geometry terms cancel; true at the midpoint,
      // a bias of ToF_{R->A} - ToF_{I->A} anywhere else
      estimate = t_r_hat - t_s_hat - t_w_assumed - t_resp;
    }
    errors.push_back(estimate - tof_true);
  }
  return errors;
}

bool attempt_selective_detection(const BasebandSignal& observed, std::size_t sequence_length,
                                 double alpha, std::size_t l0, std::uint64_t guess_seed) {
  // without the key the best the adversary can do is guess a random sequence
  std::mt19937_64 rng(guess_seed);
  SymbolSequence guess;
  guess.symbols.resize(sequence_length);
  for (auto& s : guess.symbols) s = (rng() & 1u) ? -1 : +1;
  const BasebandSignal pattern = modulate_bpsk(guess, observed.sample_period);
  if (observed.size() < pattern.size()) return false;
  return detect_pattern(observed, pattern, alpha, l0).has_value();
}

}  // namespace rangesim
