#pragma once

#include <optional>
#include <string>

#include "rangesim/protocol.hpp"

namespace rangesim {

enum class Layout { kPair, kEquidistant, kRandomDisc };

struct AdversarySpec {
  enum class Kind { kNone, kJamContinuous, kJamIntermittent };
  Kind kind = Kind::kNone;
  double power = 1.0;
  double duty_cycle = 0.1;
  std::size_t pulse_length = 64;
  double distance_m = 10.0;  // jammer distance from the initiator
};

/// Declarative experiment input. JSON field names match the member names
/// (without the unit suffix conventions changed); unknown fields are rejected.
struct ScenarioConfig {
  Layout layout = Layout::kPair;
  std::size_t n_reflectors = 1;
  double distance_m = 10.0;  // pair/circle distance, or disc radius
  double sample_rate_hz = 1e8;
  double bandwidth_hz = 1e8;
  std::size_t sequence_length = 512;
  double alpha = 50.0;
  std::size_t l0 = 256;
  std::size_t batch_size = 10;
  std::uint32_t waiting_window = 0;  // 0: derive from session_duration_target_s
  double session_duration_target_s = 0.0;
  double epoch_duration_s = 1.0;
  std::optional<double> snr_db;
  std::optional<double> noise_power;
  std::optional<double> snr_reference_distance_m;
  bool sic = true;
  bool subsample_interpolation = true;
  AdversarySpec adversary;
  std::size_t replicas = 10;
  std::uint64_t seed = 1;
  double tof_max_s = 1e-6;
  double t_hw_s = 0.0;
  double carrier_hz = 2.45e9;

  unsigned upsample_factor() const;
  std::uint32_t derived_waiting_window() const;
  double derived_noise_power() const;
};

struct ScenarioValidationError : std::runtime_error {
  explicit ScenarioValidationError(std::vector<std::string> violations);
  std::vector<std::string> violations;
};

/// Returns the list of violated invariants (empty when the config is valid).
std::vector<std::string> validate(const ScenarioConfig& cfg);

ScenarioConfig config_from_json(const std::string& json_text);
std::string config_to_json(const ScenarioConfig& cfg);
ScenarioConfig load_config(const std::string& path);

struct ReplicaResult {
  std::uint64_t replica = 0;
  SessionResult session;
};

struct ScenarioReport {
  ScenarioConfig config;
  std::vector<ReplicaResult> replicas;
  // aggregates over succeeded reflectors
  std::optional<double> mae_m;
  double failure_rate = 0.0;
  std::optional<double> ci95_m;  // normal-approximation CI over replica means
  std::size_t n_failed = 0;
  std::size_t n_total = 0;
  std::string config_hash;
  std::optional<double> axis_value;  // set by sweep()
};

/// Validate, place nodes, run `replicas` independent seeded sessions (in
/// parallel; RANGESIM_THREADS overrides the worker count) and aggregate.
ScenarioReport run_scenario(const ScenarioConfig& cfg);

/// One report per axis value; sub-seeds derived from (seed, axis index).
/// Axis "sample_rate_hz" also moves bandwidth_hz when the base config has
/// bandwidth == sample rate.
std::vector<ScenarioReport> sweep(const ScenarioConfig& base, const std::string& axis,
                                  std::span<const double> values);

/// Write sessions.csv, aggregate.csv and config.json under `dir`.
void emit_report(const ScenarioReport& report, const std::string& dir);
void emit_reports(std::span<const ScenarioReport> reports, const std::string& dir);

}  // namespace rangesim
