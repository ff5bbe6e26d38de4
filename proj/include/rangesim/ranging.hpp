#pragma once

#include <span>
#include <utility>
#include <vector>

#include "rangesim/types.hpp"

namespace rangesim {

/// Timing quantities for one request/response pair, all on the initiator clock.
/// t_w and t_resp accumulate the full waiting/response chain up to this
/// response when batch mode is in use.
struct RangingObservation {
  double t_s = 0.0;     // sent time of the request's last symbol
  double t_r = 0.0;     // received time of the response's last symbol
  double t_w = 0.0;     // waiting period(s), seconds
  double t_resp = 0.0;  // response duration(s), seconds
  double t_e = 0.0;     // estimated subsample timing error
  double t_hw = 0.0;    // calibrated constant hardware latency
};

/// ToF = (t_r - t_s - t_w - t_resp - t_hw) / 2 - t_e. May be negative; the
/// protocol layer decides rejection.
double compute_tof(const RangingObservation& obs);

/// distance = c * tof (negative passthrough).
double tof_to_distance(double tof);

/// Subset selection around the median: |B*| = min(floor(|B|/2), |received|)
/// estimates closest to the median of the received batch, averaged.
struct BatchEstimate {
  std::vector<double> received;     // per-response distance estimates, meters
  std::size_t batch_size_sent = 0;  // |B|
  std::vector<std::size_t> subset;  // indices into `received`
  double final = 0.0;               // meters
};

BatchEstimate batch_estimate(std::span<const double> estimates, std::size_t batch_size_sent);

/// Fit raw_tof = a * distance + b by least squares over (distance, raw_tof)
/// pairs and return T_HW = 2b. Requires >= 2 pairs with distinct distances.
double calibrate_hardware_latency(std::span<const std::pair<double, double>> pairs);

}  // namespace rangesim
