#include <doctest.h>

#include <cmath>
#include <random>

#include "rangesim/channel.hpp"
#include "rangesim/detector.hpp"
#include "rangesim/sequences.hpp"

using namespace rangesim;

namespace {

SharedKey test_key(int i = 0) {
  std::vector<std::uint8_t> bytes(16, 0x42);
  bytes[0] = static_cast<std::uint8_t>(i & 0xff);
  bytes[1] = static_cast<std::uint8_t>((i >> 8) & 0xff);
  return SharedKey(std::move(bytes));
}

BasebandSignal random_pattern(int seed, std::size_t length = 512, double T = 1e-8) {
  const auto seq = derive_sequence(test_key(seed), {SequenceRole::kResponse, 1, 1, 0}, length);
  return modulate_bpsk(seq, T);
}

// direct O(N*L) oracle for the normalized cross-correlation
std::vector<cplx> direct_xcorr(const BasebandSignal& received, const BasebandSignal& pattern) {
  const std::size_t n = received.size(), len = pattern.size();
  const double pe = pattern.energy();
  std::vector<cplx> out(n - len + 1);
  for (std::size_t l = 0; l < out.size(); ++l) {
    cplx acc(0.0, 0.0);
    double we = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      acc += received.samples[l + i] * std::conj(pattern.samples[i]);
      we += std::norm(received.samples[l + i]);
    }
    out[l] = (we * pe <= 1e-30) ? cplx(0.0, 0.0) : acc / std::sqrt(we * pe);
  }
  return out;
}

BasebandSignal embed(const BasebandSignal& pattern, std::size_t at, std::size_t total,
                     cplx gain = {1.0, 0.0}) {
  BasebandSignal rx;
  rx.sample_period = pattern.sample_period;
  rx.bandwidth = pattern.bandwidth;
  rx.samples.assign(total, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < pattern.size(); ++i) rx.samples[at + i] += gain * pattern.samples[i];
  return rx;
}

void add_noise(BasebandSignal& sig, double power, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(power / 2.0));
  for (cplx& s : sig.samples) s += cplx(gauss(rng), gauss(rng));
}

// pattern delayed by a fractional sample via the channel interpolator
BasebandSignal fractional_embed(const BasebandSignal& pattern, std::size_t at, double frac,
                                std::size_t total) {
  const auto taps = fractional_delay_taps(frac);
  const std::size_t half = taps.size() / 2;
  BasebandSignal rx;
  rx.sample_period = pattern.sample_period;
  rx.bandwidth = pattern.bandwidth;
  rx.samples.assign(total, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    for (std::size_t m = 0; m < taps.size(); ++m) {
      const std::size_t j = at + i + m - half;
      if (j < total) rx.samples[j] += pattern.samples[i] * taps[m];
    }
  }
  return rx;
}

}  // namespace

TEST_CASE("fft path matches the direct formula to 1e-9") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t n : {600u, 1333u, 4096u}) {
    BasebandSignal rx;
    rx.sample_period = 1e-8;
    rx.samples.resize(n);
    for (cplx& s : rx.samples) s = cplx(gauss(rng), gauss(rng));
    BasebandSignal pat;
    pat.sample_period = 1e-8;
    pat.samples.resize(257);
    for (cplx& s : pat.samples) s = cplx(gauss(rng), gauss(rng));

    const auto fast = normalized_xcorr(rx, pat);
    const auto slow = direct_xcorr(rx, pat);
    REQUIRE(fast.values.size() == slow.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < slow.size(); ++i)
      worst = std::max(worst, std::abs(fast.values[i] - slow[i]));
    CHECK(worst < 1e-9);

    // windowed scan agrees on its sub-range
    const auto windowed = normalized_xcorr_window(rx, pat, 17, 170);
    for (std::size_t i = 0; i < windowed.values.size(); ++i) {
      CHECK(std::abs(windowed.values[i] -
                     slow[static_cast<std::size_t>(windowed.lag_offset) + i]) < 1e-9);
    }
  }
}

TEST_CASE("normalized self-match and scale invariance") {
  const auto pat = random_pattern(1);
  SUBCASE("received equals pattern") {
    const auto series = normalized_xcorr(pat, pat);
    REQUIRE(series.size() == 1);
    CHECK(std::abs(series.values[0]) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("received is a scaled pattern") {
    BasebandSignal scaled = pat;
    for (cplx& s : scaled.samples) s *= 2.5;
    const auto series = normalized_xcorr(scaled, pat);
    CHECK(std::abs(series.values[0]) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("normalization bound holds everywhere") {
    auto rx = embed(pat, 100, 2048);
    add_noise(rx, 0.5, 7);
    const auto series = normalized_xcorr(rx, pat);
    for (const cplx& v : series.values) CHECK(std::abs(v) <= 1.0 + 1e-9);
  }
  SUBCASE("zero-energy pattern rejected") {
    BasebandSignal zeros;
    zeros.sample_period = 1e-8;
    zeros.samples.assign(64, cplx(0.0, 0.0));
    CHECK_THROWS_AS(normalized_xcorr(pat, zeros), std::invalid_argument);
  }
}

TEST_CASE("uncorrelated sequences stay below 0.25 (Monte-Carlo)") {
  int ok = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto pat = random_pattern(2 * t);
    const auto other = random_pattern(2 * t + 1);
    auto rx = embed(other, 400, 1536);
    add_noise(rx, 1e-12, static_cast<std::uint64_t>(t));  // keep window energies nonzero
    const auto series = normalized_xcorr(rx, pat);
    double peak = 0.0;
    for (const cplx& v : series.values) peak = std::max(peak, std::abs(v));
    if (peak < 0.25) ++ok;
  }
  CHECK(ok >= 990);
}

TEST_CASE("find_peak") {
  SUBCASE("clean embedded pattern qualifies at alpha 50") {
    const auto pat = random_pattern(5);
    const auto rx = embed(pat, 1000, 2048);
    const auto series = normalized_xcorr(rx, pat);
    const auto peak = find_peak(series, 50.0, 256);
    REQUIRE(peak.has_value());
    CHECK(peak->lag == 1000);
    CHECK(peak->magnitude == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("pure noise never qualifies (Monte-Carlo)") {
    int detections = 0;
    for (int t = 0; t < 1000; ++t) {
      const auto pat = random_pattern(t);
      BasebandSignal rx;
      rx.sample_period = 1e-8;
      rx.samples.assign(2048, cplx(0.0, 0.0));
      add_noise(rx, 1.0, 5000 + static_cast<std::uint64_t>(t));
      const auto series = normalized_xcorr(rx, pat);
      if (find_peak(series, 50.0, 256)) ++detections;
    }
    CHECK(detections <= 10);
  }
  SUBCASE("two equal maxima fail the vicinity test") {
    CorrelationSeries series;
    series.pattern_length = 4;
    series.pattern_energy = 4.0;
    series.values.assign(31, cplx(0.0, 0.0));
    series.values[10] = cplx(1.0, 0.0);
    series.values[20] = cplx(1.0, 0.0);
    CHECK_FALSE(find_peak(series, 50.0, 256).has_value());
  }
  SUBCASE("empty series rejected") {
    CorrelationSeries series;
    CHECK_THROWS_AS(find_peak(series, 50.0, 256), std::invalid_argument);
  }
  SUBCASE("argmax ties break toward the lowest lag") {
    CorrelationSeries series;
    series.values.assign(9, cplx(0.001, 0.0));
    series.values[3] = cplx(1.0, 0.0);
    series.values[6] = cplx(1.0, 0.0);
    // alpha 1 qualifies anything; the tie must resolve to lag 3
    const auto peak = find_peak(series, 1.0, 2);
    REQUIRE(peak.has_value());
    CHECK(peak->lag == 3);
  }
}

TEST_CASE("gaussian subsample interpolation") {
  const double T = 1e-8;
  SUBCASE("symmetric neighbours give zero") {
    const auto est = subsample_timing_error(0.5, 1.0, 0.5, T);
    CHECK(est.t_e == doctest::Approx(0.0));
    CHECK_FALSE(est.degenerate);
  }
  SUBCASE("analytic gaussian triples recover the offset to 1e-9") {
    for (double b = -0.49; b < 0.495; b += 0.01) {
      const auto c = [&](double x) { return std::exp(-(x - b) * (x - b) / 2.0); };
      const auto est = subsample_timing_error(c(-1.0), c(0.0), c(1.0), T);
      CHECK_FALSE(est.degenerate);
      CHECK(est.t_e == doctest::Approx(-b * T).epsilon(1e-9));
    }
  }
  SUBCASE("b = 0.3 example") {
    const auto c = [](double x) { return std::exp(-(x - 0.3) * (x - 0.3) / 2.0); };
    const auto est = subsample_timing_error(c(-1.0), c(0.0), c(1.0), T);
    CHECK(est.t_e == doctest::Approx(-0.3 * T).epsilon(1e-9));
  }
  SUBCASE("boundary case b = -0.5") {
    const auto c = [](double x) { return std::exp(-(x + 0.5) * (x + 0.5) / 2.0); };
    const auto est = subsample_timing_error(c(-1.0), c(0.0), c(1.0), T);
    CHECK(est.t_e == doctest::Approx(0.5 * T).epsilon(1e-9));
  }
  SUBCASE("degenerate inputs fall back to zero") {
    CHECK(subsample_timing_error(0.0, 1.0, 0.5, T).degenerate);
    CHECK(subsample_timing_error(0.5, -1.0, 0.5, T).degenerate);
    CHECK(subsample_timing_error(1.0, 1.0, 1.0, T).degenerate);  // vanishing denominator
    CHECK(subsample_timing_error(0.0, 1.0, 0.5, T).t_e == 0.0);
  }
}

TEST_CASE("detect_pattern") {
  const double T = 1e-8;
  SUBCASE("integer offset, no noise") {
    const auto pat = random_pattern(11);
    const auto rx = embed(pat, 700, 2048);
    const auto det = detect_pattern(rx, pat, 50.0, 256);
    REQUIRE(det.has_value());
    CHECK(det->peak_index == 700);
    CHECK(std::abs(det->timing_error) < 0.05 * T);
  }
  SUBCASE("fractional offset 0.3 recovered within 0.1 T") {
    const auto pat = random_pattern(12);
    const auto rx = fractional_embed(pat, 700, 0.3, 2048);
    const auto det = detect_pattern(rx, pat, 50.0, 256);
    REQUIRE(det.has_value());
    CHECK((det->peak_index == 700 || det->peak_index == 701));
    const double est = static_cast<double>(det->peak_index) * T - det->timing_error;
    CHECK(std::abs(est - (700.0 + 0.3) * T) < 0.1 * T);
  }
  SUBCASE("sweep of 100 fractional offsets stays within 0.15 T") {
    const auto pat = random_pattern(13);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double frac = (i + 0.5) / 100.0;
      const auto rx = fractional_embed(pat, 700, frac, 2048);
      const auto det = detect_pattern(rx, pat, 50.0, 256);
      REQUIRE(det.has_value());
      const double est = static_cast<double>(det->peak_index) * T - det->timing_error;
      worst = std::max(worst, std::abs(est - (700.0 + frac) * T));
    }
    CHECK(worst < 0.15 * T);
  }
  SUBCASE("snr 0 dB detection rate (Monte-Carlo)") {
    int detected = 0;
    for (int t = 0; t < 1000; ++t) {
      const auto pat = random_pattern(50 + t);
      auto rx = embed(pat, 700, 2048);
      add_noise(rx, 1.0, 9000 + static_cast<std::uint64_t>(t));
      const auto det = detect_pattern(rx, pat, 50.0, 256);
      if (det && std::llabs(det->peak_index - 700) <= 1) ++detected;
    }
    CHECK(detected >= 950);
  }
  SUBCASE("scale invariance of M and T_E") {
    const auto pat = random_pattern(14);
    auto rx = fractional_embed(pat, 500, 0.37, 1536);
    add_noise(rx, 0.01, 77);
    const auto base = detect_pattern(rx, pat, 50.0, 256);
    REQUIRE(base.has_value());
    for (int t = 0; t < 8; ++t) {
      const cplx c = std::polar(0.25 + 3.0 * (t % 4), 0.77 * t);
      BasebandSignal scaled = rx;
      for (cplx& s : scaled.samples) s *= c;
      const auto det = detect_pattern(scaled, pat, 50.0, 256);
      REQUIRE(det.has_value());
      CHECK(det->peak_index == base->peak_index);
      CHECK(det->timing_error == doctest::Approx(base->timing_error).epsilon(1e-9));
    }
  }
  SUBCASE("peak at the series boundary degrades gracefully") {
    const auto pat = random_pattern(15);
    const auto rx = embed(pat, 0, pat.size());  // single-lag series
    const auto det = detect_pattern(rx, pat, 50.0, 256);
    REQUIRE(det.has_value());
    CHECK(det->peak_index == 0);
    CHECK(det->timing_error == 0.0);
    CHECK(det->degenerate_interp);
  }
}
