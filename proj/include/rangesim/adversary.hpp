#pragma once

#include "rangesim/protocol.hpp"

namespace rangesim {

struct JammerConfig {
  enum class Mode { kContinuous, kIntermittent };
  Mode mode = Mode::kContinuous;
  double power = 1.0;            // complex variance per transmitted sample
  double duty_cycle = 0.1;       // intermittent mode
  std::size_t pulse_length = 64; // samples per pulse
  Position position;
};

/// Jamming emissions covering [t_begin, t_end): one continuous noise burst, or
/// seeded random pulses at the configured duty cycle.
std::vector<TimedEmission> jam(const JammerConfig& cfg, double t_begin, double t_end,
                               double sample_period, std::uint64_t seed);

/// Record-and-replay distance enlargement attacker: records the first N
/// samples of a response (X), overshadows the rest of it (Y) with noise led by
/// the recorded prefix, and replays X after replay_delay samples.
struct ReplayAttacker {
  std::size_t record_length = 100;  // N
  Position position;
  std::int64_t replay_delay = 64;   // samples between recording end and replay
  double jam_power = 1.0;           // transmit power of the jam/replay signals
};

struct EnlargementScenario {
  double reflector_distance = 15.0;
  ProtocolConfig protocol;
  ChannelConfig channel;
};

struct EnlargementOutcome {
  bool x_detected = false;        // replayed prefix accepted as a response
  bool y_detected = false;        // overshadowed original still detected
  bool enlarged_accepted = false; // any accepted estimate beyond truth + c*T
  SessionResult session;
};

/// Run one pair session with the replay attacker inline (attacker targets the
/// first response) and classify the outcome against ground-truth timing.
EnlargementOutcome enlargement_attack(const ReplayAttacker& attacker,
                                      const EnlargementScenario& scenario, std::uint64_t seed);

/// Passive observer with oracle access to signal-edge times at its own
/// position (best-case adversary; no detector model).
struct SnifferObserver {
  Position position;
  double energy_threshold = 0.0;  // unused by the oracle model, kept for the record
};

enum class TwAssumption { kOracle, kUniformPrior };
enum class GeometryAssumption { kColocatedInitiator, kMidpoint, kUnknownRandom };

struct SnifferScenario {
  double reflector_distance = 15.0;
  ProtocolConfig protocol;
  ChannelConfig channel;
};

/// ToF-estimate errors (estimate minus true ToF, seconds) across n_sessions
/// independent epochs, under the sniffer's assumption set. The observer never
/// emits, so the sessions themselves are unaffected.
std::vector<double> sniffer_estimate(const SnifferObserver& observer,
                                     const SnifferScenario& scenario, TwAssumption tw,
                                     GeometryAssumption geometry, std::size_t n_sessions,
                                     std::uint64_t seed);

/// Selective ("detect-then-jam") adversary attempt: search the observed signal
/// for a request using a wrong-key sequence guess. Without the shared key this
/// reduces to blind jamming; returns whether the guess produced a qualified
/// detection.
bool attempt_selective_detection(const BasebandSignal& observed, std::size_t sequence_length,
                                 double alpha, std::size_t l0, std::uint64_t guess_seed);

}  // namespace rangesim
