#include "rangesim/scenario.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rangesim/adversary.hpp"

namespace rangesim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 1));
}

}  // namespace

unsigned ScenarioConfig::upsample_factor() const {
  return static_cast<unsigned>(std::llround(sample_rate_hz / bandwidth_hz));
}

std::uint32_t ScenarioConfig::derived_waiting_window() const {
  if (waiting_window != 0) return waiting_window;
  const double t = 1.0 / sample_rate_hz;
  const double t_resp =
      static_cast<double>(sequence_length * upsample_factor()) * t;
  const double per_response = session_duration_target_s / static_cast<double>(batch_size);
  const double w = std::floor((per_response - t_resp) / t);
  return w > 0.0 ? static_cast<std::uint32_t>(w) : 0;
}

double ScenarioConfig::derived_noise_power() const {
  if (noise_power) return *noise_power;
  if (!snr_db) return 0.0;
  const double ref = snr_reference_distance_m.value_or(distance_m);
  const double amp = free_space_amplitude(ref, carrier_hz);
  // received per-sample signal power (unit symbols spread over the upsampled burst)
  const double sig_power = amp * amp / static_cast<double>(upsample_factor());
  return sig_power / std::pow(10.0, *snr_db / 10.0);
}

ScenarioValidationError::ScenarioValidationError(std::vector<std::string> v)
    : std::runtime_error("invalid scenario config: " +
                         [&v] {
                           std::string all;
                           for (const auto& s : v) {
                             if (!all.empty()) all += "; ";
                             all += s;
                           }
                           return all;
                         }()),
      violations(std::move(v)) {}

std::vector<std::string> validate(const ScenarioConfig& cfg) {
  std::vector<std::string> out;
  auto require = [&out](bool ok, const std::string& msg) {
    if (!ok) out.push_back(msg);
  };

  require(cfg.n_reflectors >= 1, "n_reflectors must be >= 1");
  require(cfg.layout != Layout::kPair || cfg.n_reflectors == 1,
          "PAIR layout requires n_reflectors == 1");
  require(cfg.distance_m > 0.0, "distance_m must be positive");
  require(cfg.layout != Layout::kRandomDisc || cfg.distance_m >= 1.0,
          "RANDOM_DISC radius must be >= 1 m");
  require(cfg.sample_rate_hz > 0.0, "sample_rate_hz must be positive");
  require(cfg.bandwidth_hz > 0.0, "bandwidth_hz must be positive");
  require(cfg.bandwidth_hz <= cfg.sample_rate_hz, "bandwidth must not exceed the sample rate");
  if (cfg.bandwidth_hz > 0.0 && cfg.sample_rate_hz > 0.0) {
    const double ratio = cfg.sample_rate_hz / cfg.bandwidth_hz;
    require(std::abs(ratio - std::llround(ratio)) < 1e-9,
            "sample_rate_hz / bandwidth_hz must be an integer upsampling factor");
  }
  require(cfg.sequence_length >= 8, "sequence_length must be >= 8");
  require(cfg.alpha >= 1.0, "alpha must be >= 1");
  require(cfg.l0 >= 1, "l0 must be >= 1");
  require(cfg.batch_size >= 1, "batch_size must be >= 1");
  require(cfg.waiting_window != 0 || cfg.session_duration_target_s > 0.0,
          "either waiting_window or session_duration_target_s is required");
  if (cfg.waiting_window == 0 && cfg.session_duration_target_s > 0.0 &&
      cfg.sample_rate_hz > 0.0 && cfg.bandwidth_hz > 0.0)
    require(cfg.derived_waiting_window() >= 1,
            "session_duration_target_s leaves no room for a waiting window");
  require(cfg.epoch_duration_s > 0.0, "epoch_duration_s must be positive");
  require(cfg.snr_db.has_value() || cfg.noise_power.has_value(),
          "one of snr_db or noise_power is required");
  require(!(cfg.snr_db && cfg.noise_power), "snr_db and noise_power are mutually exclusive");
  if (cfg.noise_power) require(*cfg.noise_power >= 0.0, "noise_power must be >= 0");
  require(cfg.replicas >= 1, "replicas must be >= 1");
  require(cfg.tof_max_s > 0.0, "tof_max_s must be positive");
  require(cfg.t_hw_s >= 0.0, "t_hw_s must be >= 0");
  require(cfg.carrier_hz > 0.0, "carrier_hz must be positive");
  if (cfg.adversary.kind != AdversarySpec::Kind::kNone) {
    require(cfg.adversary.power > 0.0, "adversary power must be positive");
    require(cfg.adversary.distance_m > 0.0, "adversary distance must be positive");
    if (cfg.adversary.kind == AdversarySpec::Kind::kJamIntermittent) {
      require(cfg.adversary.duty_cycle > 0.0 && cfg.adversary.duty_cycle <= 1.0,
              "duty_cycle must be in (0, 1]");
      require(cfg.adversary.pulse_length >= 1, "pulse_length must be >= 1");
    }
  }

  // epoch budget: the whole session (request, waiting chains, returns) must
  // fit inside one epoch
  if (out.empty()) {
    const double t = 1.0 / cfg.sample_rate_hz;
    const double l_sig = static_cast<double>(cfg.sequence_length * cfg.upsample_factor());
    const double worst = l_sig * t +
                         static_cast<double>(cfg.batch_size) *
                             (static_cast<double>(cfg.derived_waiting_window()) * t + l_sig * t) +
                         2.0 * cfg.tof_max_s + cfg.t_hw_s;
    if (worst >= cfg.epoch_duration_s)
      out.push_back("session span exceeds the epoch duration");
  }
  return out;
}

namespace {

using nlohmann::json;

const char* layout_name(Layout l) {
  switch (l) {
    case Layout::kPair: return "PAIR";
    case Layout::kEquidistant: return "EQUIDISTANT";
    case Layout::kRandomDisc: return "RANDOM_DISC";
  }
  return "PAIR";
}

Layout layout_from(const std::string& s) {
  if (s == "PAIR") return Layout::kPair;
  if (s == "EQUIDISTANT") return Layout::kEquidistant;
  if (s == "RANDOM_DISC") return Layout::kRandomDisc;
  throw ScenarioValidationError({"unknown layout: " + s});
}

const char* adversary_name(AdversarySpec::Kind k) {
  switch (k) {
    case AdversarySpec::Kind::kNone: return "NONE";
    case AdversarySpec::Kind::kJamContinuous: return "JAM_CONTINUOUS";
    case AdversarySpec::Kind::kJamIntermittent: return "JAM_INTERMITTENT";
  }
  return "NONE";
}

AdversarySpec::Kind adversary_from(const std::string& s) {
  if (s == "NONE") return AdversarySpec::Kind::kNone;
  if (s == "JAM_CONTINUOUS") return AdversarySpec::Kind::kJamContinuous;
  if (s == "JAM_INTERMITTENT") return AdversarySpec::Kind::kJamIntermittent;
  throw ScenarioValidationError({"unknown adversary kind: " + s});
}

}  // namespace

ScenarioConfig config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ScenarioValidationError({std::string("JSON parse error: ") + e.what()});
  }
  if (!j.is_object()) throw ScenarioValidationError({"config root must be a JSON object"});

  static const std::vector<std::string> known = {
      "layout", "n_reflectors", "distance_m", "sample_rate_hz", "bandwidth_hz",
      "sequence_length", "alpha", "l0", "batch_size", "waiting_window",
      "session_duration_target_s", "epoch_duration_s", "snr_db", "noise_power",
      "snr_reference_distance_m", "sic", "subsample_interpolation", "adversary",
      "replicas", "seed", "tof_max_s", "t_hw_s", "carrier_hz"};
  std::vector<std::string> unknown;
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      unknown.push_back("unknown field: " + key);
  }
  if (!unknown.empty()) throw ScenarioValidationError(std::move(unknown));

  ScenarioConfig cfg;
  try {
    if (j.contains("layout")) cfg.layout = layout_from(j["layout"].get<std::string>());
    if (j.contains("n_reflectors")) cfg.n_reflectors = j["n_reflectors"].get<std::size_t>();
    if (j.contains("distance_m")) cfg.distance_m = j["distance_m"].get<double>();
    if (j.contains("sample_rate_hz")) cfg.sample_rate_hz = j["sample_rate_hz"].get<double>();
    if (j.contains("bandwidth_hz")) cfg.bandwidth_hz = j["bandwidth_hz"].get<double>();
    if (j.contains("sequence_length")) cfg.sequence_length = j["sequence_length"].get<std::size_t>();
    if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
    if (j.contains("l0")) cfg.l0 = j["l0"].get<std::size_t>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("waiting_window")) cfg.waiting_window = j["waiting_window"].get<std::uint32_t>();
    if (j.contains("session_duration_target_s"))
      cfg.session_duration_target_s = j["session_duration_target_s"].get<double>();
    if (j.contains("epoch_duration_s")) cfg.epoch_duration_s = j["epoch_duration_s"].get<double>();
    if (j.contains("snr_db")) cfg.snr_db = j["snr_db"].get<double>();
    if (j.contains("noise_power")) cfg.noise_power = j["noise_power"].get<double>();
    if (j.contains("snr_reference_distance_m"))
      cfg.snr_reference_distance_m = j["snr_reference_distance_m"].get<double>();
    if (j.contains("sic")) cfg.sic = j["sic"].get<bool>();
    if (j.contains("subsample_interpolation"))
      cfg.subsample_interpolation = j["subsample_interpolation"].get<bool>();
    if (j.contains("adversary")) {
      const json& a = j["adversary"];
      if (!a.is_object()) throw ScenarioValidationError({"adversary must be an object"});
      for (const auto& [key, _] : a.items()) {
        static const std::vector<std::string> adv_known = {"kind", "power", "duty_cycle",
                                                           "pulse_length", "distance_m"};
        if (std::find(adv_known.begin(), adv_known.end(), key) == adv_known.end())
          throw ScenarioValidationError({"unknown adversary field: " + key});
      }
      if (a.contains("kind")) cfg.adversary.kind = adversary_from(a["kind"].get<std::string>());
      if (a.contains("power")) cfg.adversary.power = a["power"].get<double>();
      if (a.contains("duty_cycle")) cfg.adversary.duty_cycle = a["duty_cycle"].get<double>();
      if (a.contains("pulse_length")) cfg.adversary.pulse_length = a["pulse_length"].get<std::size_t>();
      if (a.contains("distance_m")) cfg.adversary.distance_m = a["distance_m"].get<double>();
    }
    if (j.contains("replicas")) cfg.replicas = j["replicas"].get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("tof_max_s")) cfg.tof_max_s = j["tof_max_s"].get<double>();
    if (j.contains("t_hw_s")) cfg.t_hw_s = j["t_hw_s"].get<double>();
    if (j.contains("carrier_hz")) cfg.carrier_hz = j["carrier_hz"].get<double>();
  } catch (const ScenarioValidationError&) {
    throw;
  } catch (const json::exception& e) {
    throw ScenarioValidationError({std::string("config type error: ") + e.what()});
  }
  return cfg;
}

std::string config_to_json(const ScenarioConfig& cfg) {
  json j;
  j["layout"] = layout_name(cfg.layout);
  j["n_reflectors"] = cfg.n_reflectors;
  j["distance_m"] = cfg.distance_m;
  j["sample_rate_hz"] = cfg.sample_rate_hz;
  j["bandwidth_hz"] = cfg.bandwidth_hz;
  j["sequence_length"] = cfg.sequence_length;
  j["alpha"] = cfg.alpha;
  j["l0"] = cfg.l0;
  j["batch_size"] = cfg.batch_size;
  j["waiting_window"] = cfg.waiting_window;
  j["session_duration_target_s"] = cfg.session_duration_target_s;
  j["epoch_duration_s"] = cfg.epoch_duration_s;
  if (cfg.snr_db) j["snr_db"] = *cfg.snr_db;
  if (cfg.noise_power) j["noise_power"] = *cfg.noise_power;
  if (cfg.snr_reference_distance_m) j["snr_reference_distance_m"] = *cfg.snr_reference_distance_m;
  j["sic"] = cfg.sic;
  j["subsample_interpolation"] = cfg.subsample_interpolation;
  if (cfg.adversary.kind != AdversarySpec::Kind::kNone) {
    j["adversary"] = {{"kind", adversary_name(cfg.adversary.kind)},
                      {"power", cfg.adversary.power},
                      {"duty_cycle", cfg.adversary.duty_cycle},
                      {"pulse_length", cfg.adversary.pulse_length},
                      {"distance_m", cfg.adversary.distance_m}};
  }
  j["replicas"] = cfg.replicas;
  j["seed"] = cfg.seed;
  j["tof_max_s"] = cfg.tof_max_s;
  j["t_hw_s"] = cfg.t_hw_s;
  j["carrier_hz"] = cfg.carrier_hz;
  return j.dump(2);
}

ScenarioConfig load_config(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  std::string text;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
  std::fclose(f);
  return config_from_json(text);
}

namespace {

std::vector<ReflectorNode> place_reflectors(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  std::vector<ReflectorNode> reflectors(cfg.n_reflectors);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (std::size_t k = 0; k < cfg.n_reflectors; ++k) {
    reflectors[k].id = static_cast<std::uint32_t>(k + 1);
    double r = cfg.distance_m;
    double a = 0.0;
    switch (cfg.layout) {
      case Layout::kPair:
        break;
      case Layout::kEquidistant:
        a = angle(rng);
        break;
      case Layout::kRandomDisc: {
        a = angle(rng);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        // uniform over the annulus area between 1 m and the radius
        r = std::sqrt(1.0 + u(rng) * (cfg.distance_m * cfg.distance_m - 1.0));
        break;
      }
    }
    reflectors[k].position = Position{r * std::cos(a), r * std::sin(a), 0.0};
  }
  return reflectors;
}

ProtocolConfig protocol_config(const ScenarioConfig& cfg) {
  ProtocolConfig pc;
  pc.sequence_length = cfg.sequence_length;
  pc.alpha = cfg.alpha;
  pc.l0 = cfg.l0;
  pc.waiting_window = cfg.derived_waiting_window();
  pc.batch_size = cfg.batch_size;
  pc.upsample_factor = cfg.upsample_factor();
  pc.tof_max = cfg.tof_max_s;
  pc.t_hw = cfg.t_hw_s;
  pc.epoch_duration = cfg.epoch_duration_s;
  pc.sic_enabled = cfg.sic;
  pc.subsample_interpolation = cfg.subsample_interpolation;
  return pc;
}

SessionResult run_replica(const ScenarioConfig& cfg, std::uint64_t replica) {
  const std::uint64_t seed = sub_seed(cfg.seed, replica);
  std::mt19937_64 rng(seed);

  InitiatorNode initiator{0, Position{0, 0, 0}, NodeClock{},
                          SharedKey::from_string("rangesim-scenario-shared-key"),
                          protocol_config(cfg)};
  std::vector<ReflectorNode> reflectors = place_reflectors(cfg, rng);

  ChannelConfig channel;
  channel.carrier_hz = cfg.carrier_hz;
  channel.sample_rate_hz = cfg.sample_rate_hz;
  channel.noise_power = cfg.derived_noise_power();
  channel.rng_seed = seed;

  const std::uint64_t epoch = replica;  // one session per epoch
  assume_synchronized(initiator, reflectors, epoch);

  std::vector<TimedEmission> adversary_emissions;
  if (cfg.adversary.kind != AdversarySpec::Kind::kNone) {
    JammerConfig jc;
    jc.mode = cfg.adversary.kind == AdversarySpec::Kind::kJamContinuous
                  ? JammerConfig::Mode::kContinuous
                  : JammerConfig::Mode::kIntermittent;
    jc.power = cfg.adversary.power;
    jc.duty_cycle = cfg.adversary.duty_cycle;
    jc.pulse_length = cfg.adversary.pulse_length;
    jc.position = Position{0.0, cfg.adversary.distance_m, 0.0};

    const SessionSetup setup = prepare_session(initiator, reflectors, epoch, channel);
    const double span = static_cast<double>(setup.span_samples()) / cfg.sample_rate_hz;
    adversary_emissions = jam(jc, 0.0, span, channel.sample_period(), sub_seed(seed, 0xADALL));
  }

  return run_session(initiator, reflectors, channel, epoch, seed, adversary_emissions);
}

std::size_t worker_count() {
  if (const char* env = std::getenv("RANGESIM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

ScenarioReport run_scenario(const ScenarioConfig& cfg) {
  auto violations = validate(cfg);
  if (!violations.empty()) throw ScenarioValidationError(std::move(violations));

  ScenarioReport report;
  report.config = cfg;
  {
    std::ostringstream hash;
    hash << std::hex << fnv1a(config_to_json(cfg));
    report.config_hash = hash.str();
  }

  report.replicas.resize(cfg.replicas);
  std::atomic<std::size_t> next{0};
  const std::size_t n_workers = std::min(worker_count(), cfg.replicas);
  std::vector<std::thread> workers;
  workers.reserve(n_workers);
  std::vector<std::exception_ptr> errors(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= cfg.replicas) return;
          report.replicas[i] = ReplicaResult{i, run_replica(cfg, i)};
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  // aggregates over succeeded reflectors only
  double abs_err_sum = 0.0;
  std::size_t n_succeeded = 0;
  std::vector<double> replica_means;
  for (const ReplicaResult& r : report.replicas) {
    double rep_sum = 0.0;
    std::size_t rep_n = 0;
    for (const ReflectorReport& ref : r.session.reflectors) {
      ++report.n_total;
      if (ref.failed) {
        ++report.n_failed;
      } else {
        abs_err_sum += ref.error;
        rep_sum += ref.error;
        ++n_succeeded;
        ++rep_n;
      }
    }
    if (rep_n > 0) replica_means.push_back(rep_sum / static_cast<double>(rep_n));
  }
  report.failure_rate = report.n_total == 0
                            ? 0.0
                            : static_cast<double>(report.n_failed) / static_cast<double>(report.n_total);
  if (n_succeeded > 0) report.mae_m = abs_err_sum / static_cast<double>(n_succeeded);
  if (replica_means.size() >= 2) {
    double mean = 0.0;
    for (double m : replica_means) mean += m;
    mean /= static_cast<double>(replica_means.size());
    double var = 0.0;
    for (double m : replica_means) var += (m - mean) * (m - mean);
    var /= static_cast<double>(replica_means.size() - 1);
    report.ci95_m = 1.96 * std::sqrt(var / static_cast<double>(replica_means.size()));
  }
  return report;
}

std::vector<ScenarioReport> sweep(const ScenarioConfig& base, const std::string& axis,
                                  std::span<const double> values) {
  const bool lockstep_bandwidth =
      axis == "sample_rate_hz" && base.bandwidth_hz == base.sample_rate_hz;

  std::vector<ScenarioReport> reports;
  reports.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    ScenarioConfig cfg = base;
    const double v = values[i];
    if (axis == "sample_rate_hz") {
      cfg.sample_rate_hz = v;
      if (lockstep_bandwidth) cfg.bandwidth_hz = v;
    } else if (axis == "bandwidth_hz") {
      cfg.bandwidth_hz = v;
    } else if (axis == "distance_m") {
      cfg.distance_m = v;
    } else if (axis == "n_reflectors") {
      cfg.n_reflectors = static_cast<std::size_t>(std::llround(v));
    } else if (axis == "snr_db") {
      cfg.snr_db = v;
      cfg.noise_power.reset();
    } else if (axis == "waiting_window") {
      cfg.waiting_window = static_cast<std::uint32_t>(std::llround(v));
    } else if (axis == "batch_size") {
      cfg.batch_size = static_cast<std::size_t>(std::llround(v));
    } else if (axis == "session_duration_target_s") {
      cfg.session_duration_target_s = v;
      cfg.waiting_window = 0;
    } else if (axis == "sequence_length") {
      cfg.sequence_length = static_cast<std::size_t>(std::llround(v));
    } else {
      throw ScenarioValidationError({"unknown sweep axis: " + axis});
    }
    cfg.seed = sub_seed(base.seed, i);
    ScenarioReport report = run_scenario(cfg);
    report.axis_value = v;
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace rangesim
