#include "rangesim/sic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rangesim {

namespace {

struct ScanState {
  bool valid = false;
  bool found = false;
  DetectionResult detection;
  int remaining = 1;
};

// FFT pays off once the direct window scan gets large.
constexpr std::size_t kDirectScanLimit = 1u << 22;

DetectionResult detect_on_series(const CorrelationSeries& series, double alpha, std::size_t l0,
                                 double sample_period, bool* found) {
  DetectionResult result;
  const auto peak = find_peak(series, alpha, l0);
  if (!peak) {
    *found = false;
    return result;
  }
  *found = true;
  result.peak_index = peak->lag;
  result.peak_magnitude = peak->magnitude;
  result.qualified = true;
  const auto i = static_cast<std::size_t>(peak->lag - series.lag_offset);
  if (i == 0 || i + 1 >= series.size()) {
    result.degenerate_interp = true;
  } else {
    const TimingEstimate est =
        subsample_timing_error(std::abs(series.values[i - 1]), std::abs(series.values[i]),
                               std::abs(series.values[i + 1]), sample_period);
    result.timing_error = est.t_e;
    result.degenerate_interp = est.degenerate;
  }
  return result;
}

DetectionResult scan_pattern(const BasebandSignal& residual, const SicPattern& pattern,
                             const SicOptions& options, std::span<const std::int64_t> exclusions,
                             bool* found) {
  const auto max_lag = static_cast<std::int64_t>(residual.size() - pattern.signal->size());
  std::int64_t lo = 0, hi = max_lag;
  if (pattern.lag_window) {
    lo = std::clamp<std::int64_t>(pattern.lag_window->first, 0, max_lag);
    hi = std::clamp<std::int64_t>(pattern.lag_window->second, lo, max_lag);
  }
  const std::size_t width = static_cast<std::size_t>(hi - lo + 1);
  CorrelationSeries series;
  if (width * pattern.signal->size() <= kDirectScanLimit) {
    series = normalized_xcorr_window(residual, *pattern.signal, lo, hi);
  } else if (lo == 0 && hi == max_lag) {
    series = normalized_xcorr(residual, *pattern.signal);
  } else {
    BasebandSignal slice;
    slice.sample_period = residual.sample_period;
    slice.bandwidth = residual.bandwidth;
    slice.samples.assign(residual.samples.begin() + lo,
                         residual.samples.begin() + hi + static_cast<std::int64_t>(pattern.signal->size()));
    series = normalized_xcorr(slice, *pattern.signal);
    series.lag_offset = lo;
  }
  // suppress cancellation residue around this pattern's previous extractions
  for (std::int64_t center : exclusions) {
    const std::int64_t e_lo = center - options.duplicate_exclusion_lags - series.lag_offset;
    const std::int64_t e_hi = center + options.duplicate_exclusion_lags - series.lag_offset;
    for (std::int64_t i = std::max<std::int64_t>(0, e_lo);
         i <= e_hi && i < static_cast<std::int64_t>(series.size()); ++i)
      series.values[static_cast<std::size_t>(i)] = cplx(0.0, 0.0);
  }
  return detect_on_series(series, options.alpha, options.l0, residual.sample_period, found);
}

}  // namespace

cplx estimate_attenuation(const BasebandSignal& received, const BasebandSignal& pattern,
                          std::int64_t peak_index) {
  const std::size_t len = pattern.size();
  if (len == 0) throw std::invalid_argument("estimate_attenuation: empty pattern");
  if (peak_index < 0 ||
      static_cast<std::size_t>(peak_index) + len > received.size())
    throw std::invalid_argument("estimate_attenuation: peak index out of range");
  const double pat_energy = pattern.energy();
  if (pat_energy <= 0.0) throw std::invalid_argument("estimate_attenuation: zero-energy pattern");

  cplx acc(0.0, 0.0);
  const cplx* r = received.samples.data() + peak_index;
  for (std::size_t n = 0; n < len; ++n) acc += r[n] * std::conj(pattern.samples[n]);
  return acc / pat_energy;
}

BasebandSignal cancel(const BasebandSignal& received, const BasebandSignal& pattern,
                      std::int64_t peak_index, cplx gamma) {
  const std::size_t len = pattern.size();
  if (peak_index < 0 ||
      static_cast<std::size_t>(peak_index) + len > received.size())
    throw std::invalid_argument("cancel: peak index out of range");
  BasebandSignal residual = received;
  cplx* r = residual.samples.data() + peak_index;
  for (std::size_t n = 0; n < len; ++n) r[n] -= gamma * pattern.samples[n];
  return residual;
}

SicReport detect_all(const BasebandSignal& received, std::span<const SicPattern> patterns,
                     const SicOptions& options) {
  if (patterns.empty()) throw std::invalid_argument("detect_all: need at least one pattern");
  for (const SicPattern& p : patterns) {
    if (p.signal == nullptr || p.signal->size() == 0 || p.signal->size() > received.size())
      throw std::invalid_argument("detect_all: invalid pattern");
  }

  SicReport report;
  report.residual_energy.push_back(received.energy());

  if (!options.enable_cancellation) {
    // single pass over the unmodified signal
    for (std::size_t i = 0; i < patterns.size(); ++i) {
      bool found = false;
      DetectionResult det = scan_pattern(received, patterns[i], options, {}, &found);
      if (found)
        report.detections.push_back(
            {patterns[i].id, det,
             ChannelEstimate{estimate_attenuation(received, *patterns[i].signal, det.peak_index),
                             det.peak_index, patterns[i].id}});
    }
    std::stable_sort(report.detections.begin(), report.detections.end(),
                     [](const SicDetection& a, const SicDetection& b) {
                       return a.detection.peak_magnitude > b.detection.peak_magnitude;
                     });
    return report;
  }

  BasebandSignal residual = received;
  std::vector<ScanState> states(patterns.size());
  std::vector<std::vector<std::int64_t>> extracted_at(patterns.size());
  for (auto& s : states) s.remaining = options.max_detections_per_pattern;

  for (;;) {
    for (std::size_t i = 0; i < patterns.size(); ++i) {
      ScanState& s = states[i];
      if (s.remaining <= 0 || s.valid) continue;
      s.detection = scan_pattern(residual, patterns[i], options, extracted_at[i], &s.found);
      s.valid = true;
    }

    std::size_t best = patterns.size();
    double best_mag = 0.0;
    for (std::size_t i = 0; i < patterns.size(); ++i) {
      const ScanState& s = states[i];
      if (s.remaining <= 0 || !s.found) continue;
      if (best == patterns.size() || s.detection.peak_magnitude > best_mag) {
        best = i;
        best_mag = s.detection.peak_magnitude;
      }
    }
    if (best == patterns.size()) break;

    const SicPattern& pat = patterns[best];
    const DetectionResult det = states[best].detection;
    const cplx gamma = estimate_attenuation(residual, *pat.signal, det.peak_index);
    report.detections.push_back({pat.id, det, ChannelEstimate{gamma, det.peak_index, pat.id}});
    states[best].remaining -= 1;
    extracted_at[best].push_back(det.peak_index);

    const auto len = static_cast<std::int64_t>(pat.signal->size());
    cplx* r = residual.samples.data() + det.peak_index;
    for (std::int64_t n = 0; n < len; ++n) r[n] -= gamma * pat.signal->samples[static_cast<std::size_t>(n)];
    report.residual_energy.push_back(residual.energy());

    // invalidate scans whose correlation windows read the cancelled span
    const std::int64_t c_lo = det.peak_index;
    const std::int64_t c_hi = det.peak_index + len;  // exclusive
    for (std::size_t i = 0; i < patterns.size(); ++i) {
      ScanState& s = states[i];
      if (!s.valid || s.remaining <= 0) continue;
      const auto p_len = static_cast<std::int64_t>(patterns[i].signal->size());
      const auto max_lag = static_cast<std::int64_t>(residual.size()) - p_len;
      std::int64_t lo = 0, hi = max_lag;
      if (patterns[i].lag_window) {
        lo = std::clamp<std::int64_t>(patterns[i].lag_window->first, 0, max_lag);
        hi = std::clamp<std::int64_t>(patterns[i].lag_window->second, lo, max_lag);
      }
      if (lo < c_hi && c_lo < hi + p_len) s.valid = false;
    }
  }
  return report;
}

}  // namespace rangesim
