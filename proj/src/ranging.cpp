#include "rangesim/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rangesim {

double compute_tof(const RangingObservation& obs) {
  return 0.5 * (obs.t_r - obs.t_s - obs.t_w - obs.t_resp - obs.t_hw) - obs.t_e;
}

double tof_to_distance(double tof) { return kSpeedOfLight * tof; }

BatchEstimate batch_estimate(std::span<const double> estimates, std::size_t batch_size_sent) {
  if (estimates.empty()) throw std::invalid_argument("batch_estimate: no estimates received");
  if (batch_size_sent < estimates.size())
    throw std::invalid_argument("batch_estimate: received more estimates than were sent");

  BatchEstimate out;
  out.received.assign(estimates.begin(), estimates.end());
  out.batch_size_sent = batch_size_sent;

  // median of the received batch (mean of the two middle values when even)
  std::vector<double> sorted = out.received;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median =
      (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  std::size_t subset_size = std::min(batch_size_sent / 2, n);
  if (subset_size == 0) subset_size = 1;  // |B| = 1 still yields an estimate

  // closest to the median; ties resolved toward the lower index
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(out.received[a] - median) < std::abs(out.received[b] - median);
  });
  order.resize(subset_size);
  std::sort(order.begin(), order.end());
  out.subset = order;

  double sum = 0.0;
  for (std::size_t i : out.subset) sum += out.received[i];
  out.final = sum / static_cast<double>(subset_size);
  return out;
}

double calibrate_hardware_latency(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 2) throw std::invalid_argument("calibrate_hardware_latency: need >= 2 pairs");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const auto n = static_cast<double>(pairs.size());
  for (const auto& [d, tof] : pairs) {
    sx += d;
    sy += tof;
    sxx += d * d;
    sxy += d * tof;
  }
  const double det = n * sxx - sx * sx;  // n^2 * var(distance), >= 0
  if (!(det > 1e-12 * (n * sxx + 1e-300)))
    throw std::invalid_argument("calibrate_hardware_latency: distances are degenerate");
  const double intercept = (sy * sxx - sx * sxy) / det;
  return 2.0 * intercept;
}

}  // namespace rangesim
