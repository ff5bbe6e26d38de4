#pragma once

#include <optional>

#include "rangesim/channel.hpp"
#include "rangesim/ranging.hpp"
#include "rangesim/sequences.hpp"
#include "rangesim/sic.hpp"
#include "rangesim/types.hpp"

namespace rangesim {

/// Per-node clock model. Offsets and drift shape epoch bookkeeping; signal
/// timing runs on the shared sample grid (drift over one session is orders of
/// magnitude below the sample period, matching the timing analysis).
struct NodeClock {
  double drift_ppm = 0.0;
  double offset = 0.0;            // seconds
  double processing_delay = 0.0;  // epsilon, seconds

  double local_time(double t_global) const {
    return t_global * (1.0 + drift_ppm * 1e-6) + offset;
  }
};

/// Epoch of a node at global time t.
EpochIndex check_epoch(const NodeClock& clock, double t_global, double epoch_duration);

/// T_resync = epoch_duration / (2 * drift). Returns +infinity for zero drift.
double resync_period(double epoch_duration, double drift_ppm);

struct ProtocolConfig {
  std::size_t sequence_length = 512;    // L
  double alpha = 50.0;
  std::size_t l0 = 256;
  std::uint32_t waiting_window = 1000;  // W, samples
  std::size_t batch_size = 10;          // |B|
  unsigned upsample_factor = 1;         // f_S / B
  double tof_max = 1e-6;                // seconds (300 m)
  double t_hw = 0.0;                    // seconds
  double epoch_duration = 1.0;          // seconds
  bool sic_enabled = true;
  bool subsample_interpolation = true;
};

enum class ReflectorState { kIdle, kScanning, kResponding };

struct ReflectorNode {
  std::uint32_t id = 0;
  Position position;
  NodeClock clock;
  std::uint64_t current_epoch = 0;
  bool synchronized = false;
  double epoch_origin_error = 0.0;  // Delta_k: epoch-origin estimate minus truth, seconds
  ReflectorState state = ReflectorState::kIdle;
};

struct InitiatorNode {
  std::uint32_t id = 0;
  Position position;
  NodeClock clock;
  SharedKey key;
  ProtocolConfig config;
};

struct SyncOutcome {
  std::uint32_t reflector_id = 0;
  bool synced = false;
  double mismatch = 0.0;  // Delta = eps_I + eps_R + ToF + T_E when synced
};

/// Broadcast one SYNC frame at the initiator's epoch start and let every
/// reflector attempt postamble detection + payload decryption. Reflectors that
/// succeed adopt the epoch and a fresh epoch-origin estimate.
std::vector<SyncOutcome> run_sync(const InitiatorNode& initiator,
                                  std::span<ReflectorNode> reflectors, const ChannelConfig& cfg,
                                  std::uint64_t epoch, std::uint64_t seed,
                                  std::span<const TimedEmission> adversary_emissions = {});

/// Mark reflectors as loosely synchronized without simulating the SYNC frame,
/// as after a sync in an earlier epoch: Delta_k = eps_I + eps_R + ToF_k.
void assume_synchronized(const InitiatorNode& initiator, std::span<ReflectorNode> reflectors,
                         std::uint64_t epoch);

/// Everything both sides derive from the shared key for one epoch.
struct SessionSetup {
  std::uint64_t epoch = 0;
  ProtocolConfig config;
  double sample_period = 0.0;
  BasebandSignal request;                              // upsampled
  std::vector<std::uint32_t> reflector_ids;
  std::vector<std::vector<BasebandSignal>> responses;  // [reflector][n], upsampled
  std::vector<std::vector<WaitingPeriod>> waits;       // [reflector][n]
  std::int64_t n_max = 0;                              // ToF_max in samples

  std::size_t request_length() const { return request.size(); }
  std::size_t response_length() const { return responses.empty() ? 0 : responses[0][0].size(); }
  /// Sample span of the whole session (request start to last possible arrival).
  std::int64_t span_samples() const;
};

SessionSetup prepare_session(const InitiatorNode& initiator,
                             std::span<const ReflectorNode> reflectors, std::uint64_t epoch,
                             const ChannelConfig& channel);

/// One reflector's behaviour in the responding step.
struct ReflectorActivity {
  std::uint32_t reflector_id = 0;
  bool request_detected = false;
  std::int64_t timer_origin = 0;               // grid index of the request's last symbol peak
  std::vector<TimedEmission> emissions;        // the |B| scheduled responses
};

/// Scan for the request at every synchronized reflector and build the
/// response schedules. Adversary emissions are heard by the reflectors too.
std::vector<ReflectorActivity> reflector_phase(const SessionSetup& setup,
                                               const InitiatorNode& initiator,
                                               std::span<const ReflectorNode> reflectors,
                                               const ChannelConfig& cfg, std::uint64_t seed,
                                               std::span<const TimedEmission> adversary_emissions = {});

struct ResponseRecord {
  std::uint32_t reflector_id = 0;
  std::uint32_t response_index = 0;  // n
  std::int64_t peak_index = 0;       // absolute grid index of the response start
  double peak_magnitude = 0.0;
  double t_r = 0.0;                  // seconds
  double tof = 0.0;
  double distance = 0.0;             // meters (may be out of range)
  bool accepted = false;             // within [0, c * tof_max] and not a duplicate
  bool duplicate_dropped = false;    // a second copy of an already-seen (k, n)
};

struct ReflectorReport {
  std::uint32_t reflector_id = 0;
  double true_distance = 0.0;
  bool request_detected = false;
  bool failed = true;  // no accepted response
  std::optional<BatchEstimate> estimate;
  double error = 0.0;  // |final - true|, meters, valid when !failed
  std::size_t n_responses_received = 0;
};

struct SessionResult {
  std::vector<ReflectorReport> reflectors;
  std::vector<ResponseRecord> responses;  // detection log, SIC extraction order
  double t_s = 0.0;
  double session_duration = 0.0;
};

/// Detect all expected responses in the mixed receive signal, compute
/// per-response ToF/distance, apply the acceptance window and duplicate
/// check, and fold survivors through batch_estimate.
SessionResult initiator_phase(const SessionSetup& setup, const InitiatorNode& initiator,
                              std::span<const ReflectorNode> reflectors,
                              std::span<const ReflectorActivity> activities,
                              const ChannelConfig& cfg, std::uint64_t seed,
                              std::span<const TimedEmission> adversary_emissions = {});

/// Full broadcast ranging session for one epoch (reflector + initiator phase).
SessionResult run_session(const InitiatorNode& initiator, std::span<ReflectorNode> reflectors,
                          const ChannelConfig& cfg, std::uint64_t epoch, std::uint64_t seed,
                          std::span<const TimedEmission> adversary_emissions = {});

}  // namespace rangesim
