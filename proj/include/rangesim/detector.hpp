#pragma once

#include <optional>

#include "rangesim/types.hpp"

namespace rangesim {

/// Normalized cross-correlation C_l over a sliding window of the pattern length.
/// When produced by a windowed scan, values[i] corresponds to lag lag_offset + i.
struct CorrelationSeries {
  std::vector<cplx> values;
  std::size_t pattern_length = 0;
  double pattern_energy = 0.0;
  std::int64_t lag_offset = 0;

  std::size_t size() const { return values.size(); }
};

struct PeakCandidate {
  std::int64_t lag = 0;      // absolute lag (series offset applied)
  double magnitude = 0.0;    // |C_M|
};

struct TimingEstimate {
  double t_e = 0.0;        // seconds, recorded-minus-actual convention
  bool degenerate = false; // fell back to 0 (bad triple or boundary peak)
};

struct DetectionResult {
  std::int64_t peak_index = 0;   // M
  double peak_magnitude = 0.0;   // |C_M| in [0, 1]
  double timing_error = 0.0;     // T_E, seconds, |T_E| < T
  bool qualified = false;
  bool degenerate_interp = false;
};

/// C_l = sum_n r[n+l] p*[n] / sqrt(window_energy * pattern_energy) for every
/// valid lag. FFT-based convolution plus sliding-energy normalization; windows
/// with energy below 1e-30 yield C_l = 0. Rejects zero-energy patterns.
CorrelationSeries normalized_xcorr(const BasebandSignal& received, const BasebandSignal& pattern);

/// Same series restricted to lags [lag_lo, lag_hi] (clamped to the valid
/// range), computed directly. Used for bounded searches.
CorrelationSeries normalized_xcorr_window(const BasebandSignal& received,
                                          const BasebandSignal& pattern, std::int64_t lag_lo,
                                          std::int64_t lag_hi);

/// Peak qualification: M = argmax |C_l| (ties to the lowest lag) qualifies iff
/// |C_M|^2 >= alpha * mean(|C_l'|^2) over the vicinity |l' - M| <= L0,
/// excluding M itself and the main lobe |l' - M| <= 2.
std::optional<PeakCandidate> find_peak(const CorrelationSeries& series, double alpha,
                                       std::size_t l0);

/// Gaussian three-point interpolation around the peak:
/// T_E = -T (ln C_{M+1} - ln C_{M-1}) / (4 ln C_M - 2 ln C_{M-1} - 2 ln C_{M+1}).
/// Degenerate triples (non-positive values, vanishing denominator, |T_E| >= T)
/// fall back to 0 with the flag set.
TimingEstimate subsample_timing_error(double c_m1, double c_0, double c_p1, double sample_period);

/// Full detection: correlate, qualify, interpolate. Peaks at the series
/// boundary return T_E = 0 with the degenerate flag.
std::optional<DetectionResult> detect_pattern(const BasebandSignal& received,
                                              const BasebandSignal& pattern, double alpha,
                                              std::size_t l0);

}  // namespace rangesim
