#include "rangesim/detector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rangesim/fft.hpp"

namespace rangesim {

namespace {

constexpr double kEnergyFloor = 1e-30;
constexpr std::int64_t kMainLobeExclusion = 2;

std::vector<double> window_energies(std::span<const cplx> received, std::size_t pattern_len) {
  // prefix sums of |r|^2; window energy by difference
  const std::size_t n = received.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + std::norm(received[i]);
  std::vector<double> out(n - pattern_len + 1);
  for (std::size_t l = 0; l < out.size(); ++l) out[l] = prefix[l + pattern_len] - prefix[l];
  return out;
}

}  // namespace

CorrelationSeries normalized_xcorr(const BasebandSignal& received, const BasebandSignal& pattern) {
  const std::size_t n = received.size();
  const std::size_t len = pattern.size();
  if (len == 0) throw std::invalid_argument("normalized_xcorr: empty pattern");
  if (n < len) throw std::invalid_argument("normalized_xcorr: received shorter than pattern");
  const double pat_energy = pattern.energy();
  if (pat_energy <= kEnergyFloor) throw std::invalid_argument("normalized_xcorr: zero-energy pattern");

  const std::size_t n_lags = n - len + 1;
  const std::size_t fft_n = fft::next_pow2(n + len);

  // correlation as convolution with the conjugate-reversed pattern
  std::vector<cplx> fa(fft_n, cplx(0.0, 0.0));
  std::copy(received.samples.begin(), received.samples.end(), fa.begin());
  std::vector<cplx> fb(fft_n, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < len; ++i) fb[i] = std::conj(pattern.samples[len - 1 - i]);
  fft::transform(fa, false);
  fft::transform(fb, false);
  for (std::size_t i = 0; i < fft_n; ++i) fa[i] *= fb[i];
  fft::transform(fa, true);

  CorrelationSeries series;
  series.pattern_length = len;
  series.pattern_energy = pat_energy;
  series.values.resize(n_lags);

  const auto energies = window_energies(received.samples, len);
  for (std::size_t l = 0; l < n_lags; ++l) {
    const double denom_sq = energies[l] * pat_energy;
    series.values[l] = (denom_sq <= kEnergyFloor) ? cplx(0.0, 0.0)
                                                  : fa[l + len - 1] / std::sqrt(denom_sq);
  }
  return series;
}

CorrelationSeries normalized_xcorr_window(const BasebandSignal& received,
                                          const BasebandSignal& pattern, std::int64_t lag_lo,
                                          std::int64_t lag_hi) {
  const std::size_t n = received.size();
  const std::size_t len = pattern.size();
  if (len == 0) throw std::invalid_argument("normalized_xcorr_window: empty pattern");
  if (n < len) throw std::invalid_argument("normalized_xcorr_window: received shorter than pattern");
  const double pat_energy = pattern.energy();
  if (pat_energy <= kEnergyFloor)
    throw std::invalid_argument("normalized_xcorr_window: zero-energy pattern");

  const auto max_lag = static_cast<std::int64_t>(n - len);
  lag_lo = std::clamp<std::int64_t>(lag_lo, 0, max_lag);
  lag_hi = std::clamp<std::int64_t>(lag_hi, lag_lo, max_lag);

  CorrelationSeries series;
  series.pattern_length = len;
  series.pattern_energy = pat_energy;
  series.lag_offset = lag_lo;
  series.values.resize(static_cast<std::size_t>(lag_hi - lag_lo + 1));

  // local sliding energy over [lag_lo, lag_hi + len)
  double window_energy = 0.0;
  for (std::size_t i = 0; i < len; ++i)
    window_energy += std::norm(received.samples[static_cast<std::size_t>(lag_lo) + i]);

  for (std::int64_t l = lag_lo; l <= lag_hi; ++l) {
    cplx acc(0.0, 0.0);
    const cplx* r = received.samples.data() + l;
    const cplx* p = pattern.samples.data();
    for (std::size_t i = 0; i < len; ++i) acc += r[i] * std::conj(p[i]);
    const double denom_sq = window_energy * pat_energy;
    series.values[static_cast<std::size_t>(l - lag_lo)] =
        (denom_sq <= kEnergyFloor) ? cplx(0.0, 0.0) : acc / std::sqrt(denom_sq);
    if (l < lag_hi) {
      window_energy -= std::norm(received.samples[static_cast<std::size_t>(l)]);
      window_energy += std::norm(received.samples[static_cast<std::size_t>(l) + len]);
      if (window_energy < 0.0) window_energy = 0.0;
    }
  }
  return series;
}

std::optional<PeakCandidate> find_peak(const CorrelationSeries& series, double alpha,
                                       std::size_t l0) {
  if (series.values.empty()) throw std::invalid_argument("find_peak: empty series");
  if (alpha < 1.0) throw std::invalid_argument("find_peak: alpha must be >= 1");
  if (l0 == 0) throw std::invalid_argument("find_peak: L0 must be >= 1");

  const std::size_t n = series.size();
  std::size_t m = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::abs(series.values[i]);
    if (a > best) {
      best = a;
      m = i;
    }
  }

  const auto lo = static_cast<std::size_t>(
      std::max<std::int64_t>(0, static_cast<std::int64_t>(m) - static_cast<std::int64_t>(l0)));
  const std::size_t hi = std::min(n - 1, m + l0);
  double vicinity_power = 0.0;
  std::size_t count = 0;
  for (std::size_t i = lo; i <= hi; ++i) {
    const auto d = std::abs(static_cast<std::int64_t>(i) - static_cast<std::int64_t>(m));
    if (d <= kMainLobeExclusion) continue;
    vicinity_power += std::norm(series.values[i]);
    ++count;
  }

  bool qualified;
  if (count == 0) {
    qualified = best > 0.0;  // degenerate short series: nothing to compare against
  } else {
    qualified = best * best >= alpha * (vicinity_power / static_cast<double>(count));
  }
  if (!qualified) return std::nullopt;
  return PeakCandidate{series.lag_offset + static_cast<std::int64_t>(m), best};
}

TimingEstimate subsample_timing_error(double c_m1, double c_0, double c_p1,
                                      double sample_period) {
  if (!(c_m1 > 0.0) || !(c_0 > 0.0) || !(c_p1 > 0.0)) return {0.0, true};
  const double lm = std::log(c_m1);
  const double l0 = std::log(c_0);
  const double lp = std::log(c_p1);
  const double denom = 4.0 * l0 - 2.0 * lm - 2.0 * lp;
  if (std::abs(denom) < 1e-12) return {0.0, true};
  const double t_e = -sample_period * (lp - lm) / denom;
  if (!std::isfinite(t_e) || std::abs(t_e) >= sample_period) return {0.0, true};
  return {t_e, false};
}

std::optional<DetectionResult> detect_pattern(const BasebandSignal& received,
                                              const BasebandSignal& pattern, double alpha,
                                              std::size_t l0) {
  const CorrelationSeries series = normalized_xcorr(received, pattern);
  const auto peak = find_peak(series, alpha, l0);
  if (!peak) return std::nullopt;

  DetectionResult result;
  result.peak_index = peak->lag;
  result.peak_magnitude = peak->magnitude;
  result.qualified = true;

  const auto i = static_cast<std::size_t>(peak->lag - series.lag_offset);
  if (i == 0 || i + 1 >= series.size()) {
    result.timing_error = 0.0;
    result.degenerate_interp = true;
  } else {
    const TimingEstimate est =
        subsample_timing_error(std::abs(series.values[i - 1]), std::abs(series.values[i]),
                               std::abs(series.values[i + 1]), received.sample_period);
    result.timing_error = est.t_e;
    result.degenerate_interp = est.degenerate;
  }
  return result;
}

}  // namespace rangesim
