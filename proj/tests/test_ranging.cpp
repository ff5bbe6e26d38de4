#include <doctest.h>

#include <cmath>
#include <random>

#include "rangesim/ranging.hpp"

using namespace rangesim;

TEST_CASE("compute_tof") {
  SUBCASE("direct substitution") {
    RangingObservation obs;
    obs.t_s = 0.0;
    obs.t_r = 2000e-9;
    obs.t_w = 500e-9;
    obs.t_resp = 1000e-9;
    CHECK(compute_tof(obs) == doctest::Approx(250e-9).epsilon(1e-12));
    obs.t_e = 5e-9;
    CHECK(compute_tof(obs) == doctest::Approx(245e-9).epsilon(1e-12));
  }
  SUBCASE("round-trip identity against the RTT construction") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100000; ++t) {
      const double tof = u(rng) * 1e-6;
      const double t_e = (u(rng) - 0.5) * 2e-8;
      const double t_w = u(rng) * 1e-4;
      const double t_resp = u(rng) * 1e-5 + 1e-9;
      const double t_hw = u(rng) * 1e-6;
      RangingObservation obs;
      obs.t_s = u(rng);
      obs.t_r = obs.t_s + 2.0 * (tof + t_e) + t_w + t_resp + t_hw;  // RTT construction
      obs.t_w = t_w;
      obs.t_resp = t_resp;
      obs.t_e = t_e;
      obs.t_hw = t_hw;
      CHECK(compute_tof(obs) == doctest::Approx(tof).epsilon(1e-9));
    }
  }
  SUBCASE("affine coefficients (finite differences)") {
    RangingObservation obs;
    obs.t_s = 1.0;
    obs.t_r = 1.0 + 3e-6;
    obs.t_w = 1e-6;
    obs.t_resp = 5e-7;
    const double base = compute_tof(obs);
    RangingObservation d = obs;
    d.t_r += 1e-9;
    CHECK((compute_tof(d) - base) / 1e-9 == doctest::Approx(0.5).epsilon(1e-6));
    d = obs;
    d.t_e += 1e-9;
    CHECK((compute_tof(d) - base) / 1e-9 == doctest::Approx(-1.0).epsilon(1e-6));
    d = obs;
    d.t_w += 1e-9;
    CHECK((compute_tof(d) - base) / 1e-9 == doctest::Approx(-0.5).epsilon(1e-6));
  }
}

TEST_CASE("tof_to_distance") {
  CHECK(tof_to_distance(0.0) == 0.0);
  CHECK(tof_to_distance(10e-9) == doctest::Approx(2.998).epsilon(0.01));
  CHECK(tof_to_distance(-1e-9) == doctest::Approx(-0.2998).epsilon(0.01));
}

TEST_CASE("batch_estimate") {
  SUBCASE("constant data") {
    const std::vector<double> est(7, 10.0);
    const auto b = batch_estimate(est, 10);
    CHECK(b.subset.size() == 5);
    CHECK(b.final == doctest::Approx(10.0));
    CHECK(b.batch_size_sent == 10);
  }
  SUBCASE("median distance filters the outlier") {
    const std::vector<double> est = {10, 10, 10, 10, 10, 10, 90};
    const auto b = batch_estimate(est, 10);
    CHECK(b.subset.size() == 5);
    for (std::size_t i : b.subset) CHECK(est[i] == 10.0);
    CHECK(b.final == doctest::Approx(10.0));
  }
  SUBCASE("final lies within the selected subset's range") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(10.0, 1.0);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> est(8);
      for (double& e : est) e = g(rng);
      const auto b = batch_estimate(est, 10);
      double lo = 1e300, hi = -1e300;
      for (std::size_t i : b.subset) {
        lo = std::min(lo, est[i]);
        hi = std::max(hi, est[i]);
      }
      CHECK(b.final >= lo);
      CHECK(b.final <= hi);
    }
  }
  SUBCASE("variance reduction versus single estimates (Monte-Carlo)") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(10.0, 0.2);
    double batch_err = 0.0, single_err = 0.0;
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> est(10);
      for (double& e : est) e = g(rng);
      batch_err += std::abs(batch_estimate(est, 10).final - 10.0);
      for (double e : est) single_err += std::abs(e - 10.0) / 10.0;
    }
    CHECK(batch_err < single_err);
  }
  SUBCASE("rejects bad inputs") {
    CHECK_THROWS_AS(batch_estimate(std::vector<double>{}, 10), std::invalid_argument);
    CHECK_THROWS_AS(batch_estimate(std::vector<double>{1.0, 2.0}, 1), std::invalid_argument);
  }
  SUBCASE("even-length received batch uses the mid-pair median") {
    const std::vector<double> est = {1.0, 2.0, 8.0, 9.0};
    const auto b = batch_estimate(est, 4);  // median 5.0, subset size 2
    CHECK(b.subset.size() == 2);
    CHECK(b.final == doctest::Approx((2.0 + 8.0) / 2.0));
  }
}

TEST_CASE("calibrate_hardware_latency") {
  constexpr double kThw = 200e-9;
  SUBCASE("noiseless recovery is exact") {
    std::vector<std::pair<double, double>> pairs;
    for (int d = 1; d <= 14; ++d)
      pairs.emplace_back(static_cast<double>(d), static_cast<double>(d) / kSpeedOfLight + kThw / 2.0);
    CHECK(calibrate_hardware_latency(pairs) == doctest::Approx(kThw).epsilon(1e-12));
  }
  SUBCASE("two points interpolate exactly") {
    std::vector<std::pair<double, double>> pairs = {
        {1.0, 1.0 / kSpeedOfLight + kThw / 2.0}, {14.0, 14.0 / kSpeedOfLight + kThw / 2.0}};
    CHECK(calibrate_hardware_latency(pairs) == doctest::Approx(kThw).epsilon(1e-12));
  }
  SUBCASE("gaussian timing noise, 1000 pairs (Monte-Carlo oracle)") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(1.0, 14.0);
    std::normal_distribution<double> noise(0.0, 1e-9);
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 1000; ++i) {
      const double d = dist(rng);
      pairs.emplace_back(d, d / kSpeedOfLight + kThw / 2.0 + noise(rng));
    }
    CHECK(std::abs(calibrate_hardware_latency(pairs) - kThw) < 0.2e-9);
  }
  SUBCASE("degenerate distances rejected") {
    std::vector<std::pair<double, double>> pairs = {{5.0, 1e-7}, {5.0, 1.1e-7}, {5.0, 0.9e-7}};
    CHECK_THROWS_AS(calibrate_hardware_latency(pairs), std::invalid_argument);
    CHECK_THROWS_AS(calibrate_hardware_latency(std::span<const std::pair<double, double>>{}),
                    std::invalid_argument);
  }
}
