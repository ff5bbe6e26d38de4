#include "rangesim/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "rangesim/detector.hpp"

namespace rangesim {

namespace {

constexpr std::int64_t kFilterMargin = 34;  // fractional-delay ringing allowance

std::uint64_t mix_stream(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL + (salt << 1));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::int64_t waiting_ticks_through(const std::vector<WaitingPeriod>& waits, std::size_t n) {
  std::int64_t acc = 0;
  for (std::size_t m = 0; m <= n; ++m) acc += static_cast<std::int64_t>(waits[m].ticks);
  return acc;
}

// The public postamble is short (64 symbols), so its peak-to-vicinity ratio
// tops out near its own length; a frame that qualifies here still has to pass
// the payload authentication tag.
constexpr double kSyncDetectionAlpha = 16.0;

// Equalize the 128 payload symbols by iterative reconstruct-and-subtract.
// Symbol-rate BPSK through the band-limited channel interpolator leaks into
// many neighbouring samples (the interpolator tail decays only like 1/x); the
// receiver knows the exact tap set and the postamble gives it the complex
// gain and subsample offset, so it can reconstruct the inter-symbol leakage
// from tentative decisions and strip it before re-slicing.
std::vector<cplx> equalize_sync_payload(const BasebandSignal& rx,
                                        const BasebandSignal& postamble_sig,
                                        const CorrelationSeries& series, std::int64_t peak_lag,
                                        std::size_t payload_begin) {
  const double T = rx.sample_period;
  const auto idx = static_cast<std::size_t>(peak_lag - series.lag_offset);
  const auto n = static_cast<int>(kSyncPayloadSymbols);
  const auto frame_len = static_cast<int>(kSyncPayloadSymbols + kPostambleLength);

  // centre-tap complex gain from the known postamble
  const cplx h0 = estimate_attenuation(rx, postamble_sig, peak_lag);
  if (std::norm(h0) <= 0.0) return std::vector<cplx>(kSyncPayloadSymbols, cplx(1.0, 0.0));

  // subsample offset of the true frame position relative to the peak sample
  double delta = 0.0;
  if (idx > 0 && idx + 1 < series.size()) {
    const TimingEstimate te =
        subsample_timing_error(std::abs(series.values[idx - 1]), std::abs(series.values[idx]),
                               std::abs(series.values[idx + 1]), T);
    if (!te.degenerate) delta = std::clamp(-te.t_e / T, -0.499, 0.499);
  }

  // exact interpolator taps for the estimated offset; coefficient of symbol j
  // at payload sample i is taps[center + i - j]
  const double phi = delta >= 0.0 ? delta : 1.0 + delta;
  const int shift = delta >= 0.0 ? 0 : 1;
  const std::vector<double> taps = fractional_delay_taps(phi);
  const int center = static_cast<int>(taps.size() / 2) + shift;
  const double c0 = taps[static_cast<std::size_t>(center)];
  if (std::abs(c0) < 1e-6) return std::vector<cplx>(kSyncPayloadSymbols, cplx(1.0, 0.0));
  const cplx gain = h0 / c0;

  const SymbolSequence postamble = postamble_sequence();
  std::vector<double> symbols(static_cast<std::size_t>(frame_len));
  for (int j = n; j < frame_len; ++j)
    symbols[static_cast<std::size_t>(j)] =
        static_cast<double>(postamble.symbols[static_cast<std::size_t>(j - n)]);
  for (int i = 0; i < n; ++i)
    symbols[static_cast<std::size_t>(i)] =
        std::real(rx.samples[payload_begin + static_cast<std::size_t>(i)] * std::conj(h0)) >= 0.0
            ? 1.0
            : -1.0;

  for (int pass = 0; pass < 4; ++pass) {
    std::vector<double> next(symbols);
    for (int i = 0; i < n; ++i) {
      cplx model(0.0, 0.0);
      const int j_lo = std::max(0, i + center - static_cast<int>(taps.size()) + 1);
      const int j_hi = std::min(frame_len - 1, i + center);
      for (int j = j_lo; j <= j_hi; ++j)
        model += gain * taps[static_cast<std::size_t>(center + i - j)] *
                 symbols[static_cast<std::size_t>(j)];
      // remove everything except the symbol's own contribution
      const cplx cleaned = rx.samples[payload_begin + static_cast<std::size_t>(i)] - model +
                           h0 * symbols[static_cast<std::size_t>(i)];
      next[static_cast<std::size_t>(i)] = std::real(cleaned * std::conj(h0)) >= 0.0 ? 1.0 : -1.0;
    }
    const bool changed =
        !std::equal(symbols.begin(), symbols.begin() + n, next.begin());
    symbols.swap(next);
    if (!changed) break;
  }

  std::vector<cplx> out(kSyncPayloadSymbols);
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = cplx(symbols[static_cast<std::size_t>(i)], 0.0);
  return out;
}

}  // namespace

EpochIndex check_epoch(const NodeClock& clock, double t_global, double epoch_duration) {
  return EpochIndex::at(clock.local_time(t_global), epoch_duration);
}

double resync_period(double epoch_duration, double drift_ppm) {
  if (epoch_duration <= 0.0)
    throw std::invalid_argument("resync_period: epoch duration must be positive");
  if (drift_ppm < 0.0) throw std::invalid_argument("resync_period: drift must be non-negative");
  if (drift_ppm == 0.0) return std::numeric_limits<double>::infinity();
  return 0.5 * epoch_duration / (drift_ppm * 1e-6);
}

void assume_synchronized(const InitiatorNode& initiator, std::span<ReflectorNode> reflectors,
                         std::uint64_t epoch) {
  for (ReflectorNode& r : reflectors) {
    r.synchronized = true;
    r.current_epoch = epoch;
    r.state = ReflectorState::kScanning;
    r.epoch_origin_error = initiator.clock.processing_delay + r.clock.processing_delay +
                           r.position.distance_to(initiator.position) / kSpeedOfLight;
  }
}

std::vector<SyncOutcome> run_sync(const InitiatorNode& initiator,
                                  std::span<ReflectorNode> reflectors, const ChannelConfig& cfg,
                                  std::uint64_t epoch, std::uint64_t seed,
                                  std::span<const TimedEmission> adversary_emissions) {
  const double T = cfg.sample_period();
  const double epoch_duration = initiator.config.epoch_duration;
  const SymbolSequence postamble = postamble_sequence();
  const BasebandSignal frame =
      build_sync_frame(initiator.key, initiator.id, EpochIndex{epoch, epoch_duration}, postamble, T);
  const BasebandSignal postamble_sig = modulate_bpsk(postamble, T);

  // the frame leaves after the initiator's own processing delay
  const auto eps_i_ticks =
      static_cast<std::int64_t>(std::ceil(initiator.clock.processing_delay / T));
  const TimedEmission tx{frame, static_cast<double>(eps_i_ticks) * T, initiator.position,
                         initiator.id};

  const auto n_max = static_cast<std::int64_t>(std::ceil(initiator.config.tof_max / T));
  const std::int64_t buf_begin = -kFilterMargin - 64;
  const std::int64_t buf_end =
      eps_i_ticks + static_cast<std::int64_t>(frame.size()) + n_max + kFilterMargin + 64;
  const auto buf_len = static_cast<std::size_t>(buf_end - buf_begin);

  std::vector<SyncOutcome> outcomes;
  outcomes.reserve(reflectors.size());
  for (ReflectorNode& r : reflectors) {
    SyncOutcome outcome{r.id, false, 0.0};
    std::vector<PropagatedSignal> props;
    props.push_back(propagate(tx, r.position, cfg));
    for (const TimedEmission& e : adversary_emissions)
      props.push_back(propagate(e, r.position, cfg));
    const BasebandSignal rx =
        mix(props, buf_begin, buf_len, cfg, mix_stream(seed, 0x53594e43ULL + r.id));

    const CorrelationSeries series = normalized_xcorr(rx, postamble_sig);
    const auto peak = find_peak(series, kSyncDetectionAlpha, kPostambleLength);
    if (peak) {
      const std::int64_t m = peak->lag;  // postamble start within the buffer
      const auto payload_begin = m - static_cast<std::int64_t>(kSyncPayloadSymbols);
      if (payload_begin >= 0 &&
          static_cast<std::size_t>(m) + kPostambleLength <= rx.size()) {
        const auto symbols =
            equalize_sync_payload(rx, postamble_sig, series, m,
                                  static_cast<std::size_t>(payload_begin));

        // the receiver's nonce guess is its own epoch reading
        const double rel_offset = r.clock.offset - initiator.clock.offset;
        const auto hint = static_cast<std::int64_t>(static_cast<std::int64_t>(epoch) +
                                                    std::floor(rel_offset / epoch_duration));
        const auto payload =
            decode_sync_payload(symbols, initiator.key,
                                hint > 0 ? static_cast<std::uint64_t>(hint) : 0ULL);
        if (payload && payload->initiator_id == initiator.id) {
          r.synchronized = true;
          r.current_epoch = payload->epoch;
          r.state = ReflectorState::kScanning;
          // epoch-origin estimate: detected frame start plus own reaction latency
          r.epoch_origin_error =
              static_cast<double>(buf_begin + payload_begin) * T + r.clock.processing_delay;
          outcome.synced = true;
          outcome.mismatch = r.epoch_origin_error;
        }
      }
    }
    outcomes.push_back(outcome);
  }
  return outcomes;
}

SessionSetup prepare_session(const InitiatorNode& initiator,
                             std::span<const ReflectorNode> reflectors, std::uint64_t epoch,
                             const ChannelConfig& channel) {
  const ProtocolConfig& cfg = initiator.config;
  const double T = channel.sample_period();

  SessionSetup setup;
  setup.epoch = epoch;
  setup.config = cfg;
  setup.sample_period = T;
  setup.n_max = static_cast<std::int64_t>(std::ceil(cfg.tof_max / T));

  const SequenceLabel req_label{SequenceRole::kRequest, initiator.id, epoch, std::nullopt};
  setup.request = upsample(
      modulate_bpsk(derive_sequence(initiator.key, req_label, cfg.sequence_length), T),
      cfg.upsample_factor);

  setup.reflector_ids.reserve(reflectors.size());
  setup.responses.resize(reflectors.size());
  setup.waits.resize(reflectors.size());
  for (std::size_t k = 0; k < reflectors.size(); ++k) {
    setup.reflector_ids.push_back(reflectors[k].id);
    setup.responses[k].reserve(cfg.batch_size);
    setup.waits[k].reserve(cfg.batch_size);
    for (std::uint32_t n = 0; n < cfg.batch_size; ++n) {
      const SequenceLabel label{SequenceRole::kResponse, reflectors[k].id, epoch, n};
      setup.responses[k].push_back(upsample(
          modulate_bpsk(derive_sequence(initiator.key, label, cfg.sequence_length), T),
          cfg.upsample_factor));
      setup.waits[k].push_back(derive_waiting_period(initiator.key, reflectors[k].id, epoch, n,
                                                     cfg.waiting_window, T));
    }
  }
  return setup;
}

std::int64_t SessionSetup::span_samples() const {
  const auto l_q = static_cast<std::int64_t>(request_length());
  const auto l_p = static_cast<std::int64_t>(response_length());
  std::int64_t worst_chain = 0;
  for (const auto& w : waits) {
    std::int64_t chain = 0;
    for (const auto& wp : w) chain += static_cast<std::int64_t>(wp.ticks) + l_p;
    worst_chain = std::max(worst_chain, chain);
  }
  return l_q + worst_chain + 2 * n_max + kFilterMargin;
}

namespace {

struct SessionGeometry {
  std::int64_t l_q = 0;
  std::int64_t l_p = 0;
  std::int64_t n_max = 0;
  std::int64_t t_hw_lo = 0, t_hw_hi = 0;
  double T = 0.0;
};

SessionGeometry geometry(const SessionSetup& setup) {
  SessionGeometry g;
  g.T = setup.sample_period;
  g.l_q = static_cast<std::int64_t>(setup.request_length());
  g.l_p = static_cast<std::int64_t>(setup.response_length());
  g.n_max = setup.n_max;
  g.t_hw_lo = static_cast<std::int64_t>(std::floor(setup.config.t_hw / g.T));
  g.t_hw_hi = static_cast<std::int64_t>(std::ceil(setup.config.t_hw / g.T));
  return g;
}

}  // namespace

std::vector<ReflectorActivity> reflector_phase(const SessionSetup& setup,
                                               const InitiatorNode& initiator,
                                               std::span<const ReflectorNode> reflectors,
                                               const ChannelConfig& cfg, std::uint64_t seed,
                                               std::span<const TimedEmission> adversary_emissions) {
  const SessionGeometry g = geometry(setup);
  const ProtocolConfig& pc = setup.config;

  // the request leaves at the initiator's epoch start (grid index 0)
  const TimedEmission req_tx{setup.request, 0.0, initiator.position, initiator.id};

  // scan guard: epoch-origin mismatch bound plus slack
  double delta_max = initiator.clock.processing_delay + pc.tof_max;
  for (const ReflectorNode& r : reflectors)
    delta_max = std::max(delta_max, r.epoch_origin_error + r.clock.processing_delay);
  const auto guard = static_cast<std::int64_t>(std::ceil(delta_max / g.T)) + 16;

  std::vector<ReflectorActivity> activities;
  activities.reserve(reflectors.size());
  for (std::size_t k = 0; k < reflectors.size(); ++k) {
    const ReflectorNode& r = reflectors[k];
    ReflectorActivity activity;
    activity.reflector_id = r.id;
    if (!r.synchronized || r.current_epoch != setup.epoch) {
      activities.push_back(std::move(activity));
      continue;  // silent non-participation
    }

    const auto origin_est = static_cast<std::int64_t>(std::llround(r.epoch_origin_error / g.T));
    const std::int64_t buf_begin = origin_est - guard - kFilterMargin;
    const std::int64_t buf_end = origin_est + guard + g.l_q + g.n_max + kFilterMargin;
    const auto buf_len = static_cast<std::size_t>(buf_end - buf_begin);

    std::vector<PropagatedSignal> props;
    props.push_back(propagate(req_tx, r.position, cfg));
    for (const TimedEmission& e : adversary_emissions)
      props.push_back(propagate(e, r.position, cfg));
    const BasebandSignal rx =
        mix(props, buf_begin, buf_len, cfg, mix_stream(seed, 0x52454600ULL + r.id));

    const CorrelationSeries series = normalized_xcorr(rx, setup.request);
    const auto peak = find_peak(series, pc.alpha, pc.l0);
    if (!peak) {
      activities.push_back(std::move(activity));
      continue;
    }

    // timer starts at the integer peak position of the request's last symbol
    activity.request_detected = true;
    activity.timer_origin = buf_begin + peak->lag + g.l_q - 1;

    std::int64_t prev_end = activity.timer_origin;
    for (std::size_t n = 0; n < pc.batch_size; ++n) {
      const std::int64_t start = prev_end + 1 + static_cast<std::int64_t>(setup.waits[k][n].ticks);
      activity.emissions.push_back(TimedEmission{setup.responses[k][n],
                                                 static_cast<double>(start) * g.T + pc.t_hw,
                                                 r.position, r.id});
      prev_end = start + g.l_p - 1;
    }
    activities.push_back(std::move(activity));
  }
  return activities;
}

SessionResult initiator_phase(const SessionSetup& setup, const InitiatorNode& initiator,
                              std::span<const ReflectorNode> reflectors,
                              std::span<const ReflectorActivity> activities,
                              const ChannelConfig& cfg, std::uint64_t seed,
                              std::span<const TimedEmission> adversary_emissions) {
  const SessionGeometry g = geometry(setup);
  const ProtocolConfig& pc = setup.config;
  const double T = g.T;
  const std::size_t n_reflectors = reflectors.size();

  SessionResult result;
  result.t_s = static_cast<double>(g.l_q - 1) * T;

  // receive window: from the end of our own transmission to the latest
  // possible arrival of the last response
  const std::int64_t buf_begin = g.l_q;
  std::int64_t last_hi = buf_begin + 1;
  std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>> windows(n_reflectors);
  for (std::size_t k = 0; k < n_reflectors; ++k) {
    windows[k].resize(pc.batch_size);
    std::int64_t chain_w = 0;
    for (std::size_t n = 0; n < pc.batch_size; ++n) {
      chain_w += static_cast<std::int64_t>(setup.waits[k][n].ticks);
      const std::int64_t pre = chain_w + static_cast<std::int64_t>(n) * g.l_p;
      const std::int64_t lo = g.l_q + pre + g.t_hw_lo - 3;
      const std::int64_t hi = g.l_q + pre + 2 * g.n_max + g.t_hw_hi + 4;
      windows[k][n] = {lo, hi};
      last_hi = std::max(last_hi, hi);
    }
  }
  const std::int64_t buf_end = last_hi + g.l_p + kFilterMargin;
  const auto buf_len = static_cast<std::size_t>(buf_end - buf_begin);
  result.session_duration = static_cast<double>(buf_end) * T;

  std::vector<PropagatedSignal> props;
  for (const ReflectorActivity& a : activities)
    for (const TimedEmission& e : a.emissions) props.push_back(propagate(e, initiator.position, cfg));
  for (const TimedEmission& e : adversary_emissions)
    props.push_back(propagate(e, initiator.position, cfg));
  const BasebandSignal rx = mix(props, buf_begin, buf_len, cfg, mix_stream(seed, 0x494e4954ULL));

  // one pattern per expected response, searched only where the waiting chain
  // allows it to arrive
  std::vector<SicPattern> patterns;
  patterns.reserve(n_reflectors * pc.batch_size);
  for (std::size_t k = 0; k < n_reflectors; ++k) {
    for (std::size_t n = 0; n < pc.batch_size; ++n) {
      SicPattern p;
      p.signal = &setup.responses[k][n];
      p.id = static_cast<std::uint32_t>(k * pc.batch_size + n);
      p.lag_window = {{windows[k][n].first - buf_begin, windows[k][n].second - buf_begin}};
      patterns.push_back(p);
    }
  }

  SicOptions opts;
  opts.alpha = pc.alpha;
  opts.l0 = pc.l0;
  opts.enable_cancellation = pc.sic_enabled;
  opts.max_detections_per_pattern = pc.sic_enabled ? 2 : 1;
  opts.duplicate_exclusion_lags = 2 * static_cast<std::int64_t>(pc.upsample_factor) + 2;
  const SicReport sic = detect_all(rx, patterns, opts);

  // per-(reflector, n) duplicate check: the earliest arrival wins
  std::map<std::uint32_t, std::size_t> first_seen;
  for (const SicDetection& det : sic.detections) {
    const std::size_t k = det.pattern_id / pc.batch_size;
    const auto n = static_cast<std::uint32_t>(det.pattern_id % pc.batch_size);

    ResponseRecord rec;
    rec.reflector_id = setup.reflector_ids[k];
    rec.response_index = n;
    rec.peak_index = buf_begin + det.detection.peak_index;
    rec.peak_magnitude = det.detection.peak_magnitude;
    rec.t_r = static_cast<double>(rec.peak_index + g.l_p - 1) * T;

    RangingObservation obs;
    obs.t_s = result.t_s;
    obs.t_r = rec.t_r;
    obs.t_w = static_cast<double>(waiting_ticks_through(setup.waits[k], n)) * T;
    obs.t_resp = static_cast<double>(n + 1) * static_cast<double>(g.l_p) * T;
    obs.t_e = pc.subsample_interpolation ? det.detection.timing_error : 0.0;
    obs.t_hw = pc.t_hw;
    rec.tof = compute_tof(obs);
    rec.distance = tof_to_distance(rec.tof);

    const bool in_range = rec.tof >= 0.0 && rec.tof <= pc.tof_max;
    auto [it, inserted] = first_seen.try_emplace(det.pattern_id, result.responses.size());
    if (inserted) {
      rec.accepted = in_range;
    } else {
      ResponseRecord& prev = result.responses[it->second];
      if (rec.t_r < prev.t_r) {
        prev.duplicate_dropped = true;
        prev.accepted = false;
        rec.accepted = in_range;
        it->second = result.responses.size();
      } else {
        rec.duplicate_dropped = true;
        rec.accepted = false;
      }
    }
    result.responses.push_back(rec);
  }

  // fold accepted estimates per reflector, ordered by response index
  result.reflectors.resize(n_reflectors);
  for (std::size_t k = 0; k < n_reflectors; ++k) {
    ReflectorReport& rep = result.reflectors[k];
    rep.reflector_id = setup.reflector_ids[k];
    rep.true_distance = reflectors[k].position.distance_to(initiator.position);
    rep.request_detected = k < activities.size() && activities[k].request_detected;

    std::vector<std::pair<std::uint32_t, double>> accepted;
    for (const ResponseRecord& rec : result.responses) {
      if (rec.reflector_id == rep.reflector_id && rec.accepted)
        accepted.emplace_back(rec.response_index, rec.distance);
    }
    std::sort(accepted.begin(), accepted.end());
    rep.n_responses_received = accepted.size();
    if (accepted.empty()) {
      rep.failed = true;
      continue;
    }
    std::vector<double> estimates;
    estimates.reserve(accepted.size());
    for (const auto& [n, d] : accepted) estimates.push_back(d);
    rep.estimate = batch_estimate(estimates, pc.batch_size);
    rep.failed = false;
    rep.error = std::abs(rep.estimate->final - rep.true_distance);
  }
  return result;
}

SessionResult run_session(const InitiatorNode& initiator, std::span<ReflectorNode> reflectors,
                          const ChannelConfig& cfg, std::uint64_t epoch, std::uint64_t seed,
                          std::span<const TimedEmission> adversary_emissions) {
  const SessionSetup setup = prepare_session(initiator, reflectors, epoch, cfg);
  const auto activities =
      reflector_phase(setup, initiator, reflectors, cfg, seed, adversary_emissions);
  return initiator_phase(setup, initiator, reflectors, activities, cfg, seed, adversary_emissions);
}

}  // namespace rangesim
