#pragma once

#include <optional>
#include <utility>

#include "rangesim/detector.hpp"
#include "rangesim/types.hpp"

namespace rangesim {

/// One-tap complex channel estimate for a pattern aligned at peak_index.
struct ChannelEstimate {
  cplx gamma{0.0, 0.0};
  std::int64_t peak_index = 0;
  std::uint32_t pattern_id = 0;
};

struct SicDetection {
  std::uint32_t pattern_id = 0;
  DetectionResult detection;
  ChannelEstimate estimate;
};

/// Ordered extraction log: detections in extraction order (argmax of the
/// current residual at each step), residual_energy[0] is the initial energy
/// and one entry is appended after every cancellation.
struct SicReport {
  std::vector<SicDetection> detections;
  std::vector<double> residual_energy;
};

/// A pattern to search for, with an optional bounded lag window.
struct SicPattern {
  const BasebandSignal* signal = nullptr;
  std::uint32_t id = 0;
  std::optional<std::pair<std::int64_t, std::int64_t>> lag_window;  // inclusive
};

struct SicOptions {
  double alpha = 50.0;
  std::size_t l0 = 256;
  bool enable_cancellation = true;
  // The protocol layer sets 2 so a replayed duplicate of an already-extracted
  // response is still surfaced for the duplicate check.
  int max_detections_per_pattern = 1;
  // One-tap cancellation of a fractionally delayed response leaves residue in
  // the correlation main lobe; re-detections of the same pattern this close to
  // a previous extraction are residue, not copies (a real record-and-replay
  // copy lands at least the recording length away).
  std::int64_t duplicate_exclusion_lags = 4;
};

/// Least-squares complex gain of `pattern` aligned at lag M in `received`.
cplx estimate_attenuation(const BasebandSignal& received, const BasebandSignal& pattern,
                          std::int64_t peak_index);

/// residual[M+n] = received[M+n] - gamma * pattern[n]; other samples unchanged.
BasebandSignal cancel(const BasebandSignal& received, const BasebandSignal& pattern,
                      std::int64_t peak_index, cplx gamma);

/// Successive interference cancellation: repeatedly detect the strongest
/// qualified pattern on the residual, record it (timing error taken from the
/// residual state in which the peak was found), estimate and subtract its
/// contribution, and continue until nothing qualifies. With cancellation
/// disabled this is a single detection pass ordered by peak magnitude.
SicReport detect_all(const BasebandSignal& received, std::span<const SicPattern> patterns,
                     const SicOptions& options);

}  // namespace rangesim
