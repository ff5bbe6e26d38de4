#include "rangesim/channel.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace rangesim {

namespace {

constexpr int kFracDelayTaps = 63;
constexpr int kFracDelayHalf = kFracDelayTaps / 2;
constexpr double kFracDelayCutoff = 0.68;  // fraction of Nyquist
constexpr double kIntegerDelayTol = 1e-9;  // samples

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double free_space_amplitude(double distance_m, double carrier_hz) {
  const double wavelength = kSpeedOfLight / carrier_hz;
  return wavelength / (4.0 * std::numbers::pi * distance_m);
}

double fractional_delay_pulse(double offset_samples) {
  const double arg = std::numbers::pi * kFracDelayCutoff * offset_samples;
  const double s = (std::abs(arg) < 1e-12) ? 1.0 : std::sin(arg) / arg;
  return kFracDelayCutoff * s;
}

std::vector<double> fractional_delay_taps(double frac) {
  std::vector<double> h(kFracDelayTaps);
  for (int m = 0; m < kFracDelayTaps; ++m) {
    const double x = static_cast<double>(m - kFracDelayHalf) - frac;
    const double arg = std::numbers::pi * kFracDelayCutoff * x;
    const double s = (std::abs(arg) < 1e-12) ? 1.0 : std::sin(arg) / arg;
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(m) /
                                            static_cast<double>(kFracDelayTaps - 1));
    h[static_cast<std::size_t>(m)] = kFracDelayCutoff * s * w;
  }
  return h;
}

PropagatedSignal propagate(const TimedEmission& emission, const Position& rx,
                           const ChannelConfig& cfg) {
  const double d = emission.source.distance_to(rx);
  if (d <= 0.0) throw std::invalid_argument("propagate: zero distance");

  const double T = cfg.sample_period();
  const double tof = d / kSpeedOfLight;
  const double arrival = emission.start_time + tof;
  const double amp = free_space_amplitude(d, cfg.carrier_hz);
  const double phase = -2.0 * std::numbers::pi * cfg.carrier_hz * tof;
  const cplx gain = std::polar(amp, std::remainder(phase, 2.0 * std::numbers::pi));

  const double pos = arrival / T;  // grid position of the first sample
  auto base = static_cast<std::int64_t>(std::floor(pos));
  double frac = pos - static_cast<double>(base);
  if (frac > 1.0 - kIntegerDelayTol) {
    base += 1;
    frac = 0.0;
  } else if (frac < kIntegerDelayTol) {
    frac = 0.0;
  }

  PropagatedSignal out;
  out.arrival_time = arrival;
  out.path_gain = amp;
  out.signal.sample_period = T;
  out.signal.bandwidth = emission.signal.bandwidth;

  const std::size_t n = emission.signal.size();
  if (frac == 0.0) {
    out.start_index = base;
    out.signal.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.signal.samples[i] = gain * emission.signal.samples[i];
    return out;
  }

  // band-limited fractional delay: y[j] = sum_m h[m] x[j - (m - half)], delayed by frac
  const std::vector<double> taps = fractional_delay_taps(frac);
  out.start_index = base - kFracDelayHalf;
  out.signal.samples.assign(n + kFracDelayTaps - 1, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const cplx v = gain * emission.signal.samples[i];
    for (int m = 0; m < kFracDelayTaps; ++m)
      out.signal.samples[i + static_cast<std::size_t>(m)] += v * taps[static_cast<std::size_t>(m)];
  }
  return out;
}

BasebandSignal mix(std::span<const PropagatedSignal> emissions, std::int64_t t0_index,
                   std::size_t length, const ChannelConfig& cfg, std::uint64_t noise_stream) {
  BasebandSignal out;
  out.sample_period = cfg.sample_period();
  out.bandwidth = cfg.sample_rate_hz;
  out.samples.assign(length, cplx(0.0, 0.0));

  for (const PropagatedSignal& e : emissions) {
    const std::int64_t rel = e.start_index - t0_index;
    for (std::size_t i = 0; i < e.signal.size(); ++i) {
      const std::int64_t j = rel + static_cast<std::int64_t>(i);
      if (j < 0 || j >= static_cast<std::int64_t>(length)) continue;
      out.samples[static_cast<std::size_t>(j)] += e.signal.samples[i];
    }
  }

  if (cfg.noise_power > 0.0) {
    std::mt19937_64 rng(splitmix64(cfg.rng_seed ^ splitmix64(noise_stream)));
    std::normal_distribution<double> gauss(0.0, std::sqrt(cfg.noise_power / 2.0));
    for (cplx& s : out.samples) s += cplx(gauss(rng), gauss(rng));
  }
  return out;
}

}  // namespace rangesim
