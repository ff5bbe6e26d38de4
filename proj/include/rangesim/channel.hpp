#pragma once

#include <span>

#include "rangesim/types.hpp"

namespace rangesim {

/// A signal leaving `source` at `start_time` (global time, seconds). Start
/// times sit on the shared sample grid: start_time = start_index * T.
struct TimedEmission {
  BasebandSignal signal;
  double start_time = 0.0;
  Position source;
  std::uint32_t source_id = 0;
};

struct ChannelConfig {
  double carrier_hz = 2.45e9;     // f_c
  double sample_rate_hz = 1e8;    // f_S
  double noise_power = 0.0;       // complex noise variance per sample at every receiver
  std::uint64_t rng_seed = 0;

  double sample_period() const { return 1.0 / sample_rate_hz; }
};

/// Emission as seen at a receiver: free-space gain and carrier phase applied,
/// fractional delay resolved onto the receiver grid. The waveform nominally
/// begins at grid index start_index + filter margin (see signal_begin).
struct PropagatedSignal {
  BasebandSignal signal;
  std::int64_t start_index = 0;  // grid index of signal.samples[0]
  double arrival_time = 0.0;     // exact (continuous) arrival of the first source sample
  double path_gain = 0.0;        // |FSPL amplitude|
};

/// Amplitude free-space loss lambda / (4 pi d).
double free_space_amplitude(double distance_m, double carrier_hz);

/// 63-tap Hamming windowed-sinc interpolation taps for a delay of `frac`
/// samples, cutoff 0.68 of Nyquist. Exposed for filter-level tests.
std::vector<double> fractional_delay_taps(double frac);

/// The interpolator's continuous underlying pulse at a given sample offset
/// (window ignored). Receivers use it to predict inter-symbol leakage.
double fractional_delay_pulse(double offset_samples);

/// Delay + attenuate one emission towards `rx`: amplitude lambda/(4 pi d),
/// carrier phase e^{-i 2 pi f_c d / c}, integer delay as a grid offset and the
/// fractional remainder through the windowed-sinc interpolator (skipped when
/// the delay is integral). Rejects d = 0.
PropagatedSignal propagate(const TimedEmission& emission, const Position& rx,
                           const ChannelConfig& cfg);

/// Sum propagated emissions into a receive buffer covering grid indices
/// [t0_index, t0_index + length) and add circularly symmetric complex Gaussian
/// noise of cfg.noise_power, seeded by (cfg.rng_seed, noise_stream).
BasebandSignal mix(std::span<const PropagatedSignal> emissions, std::int64_t t0_index,
                   std::size_t length, const ChannelConfig& cfg, std::uint64_t noise_stream);

}  // namespace rangesim
