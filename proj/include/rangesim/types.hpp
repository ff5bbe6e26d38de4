#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace rangesim {

using cplx = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Secret key shared by all ranging nodes. Immutable; at least 16 octets.
class SharedKey {
 public:
  explicit SharedKey(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
    if (bytes_.size() < 16) throw std::invalid_argument("SharedKey: need at least 16 octets");
  }
  static SharedKey from_string(std::string_view s) {
    return SharedKey(std::vector<std::uint8_t>(s.begin(), s.end()));
  }
  std::span<const std::uint8_t> bytes() const { return bytes_; }
  bool operator==(const SharedKey& other) const { return bytes_ == other.bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Discrete time epoch: value = floor(local_time / duration).
struct EpochIndex {
  std::uint64_t value = 0;
  double duration = 1.0;  // seconds, > 0

  static EpochIndex at(double local_time, double duration) {
    if (duration <= 0.0) throw std::invalid_argument("EpochIndex: duration must be positive");
    double e = std::floor(local_time / duration);
    return EpochIndex{e <= 0.0 ? 0ULL : static_cast<std::uint64_t>(e), duration};
  }
};

/// Role byte used in the PRF label encoding. Values are part of the wire format.
enum class SequenceRole : std::uint8_t {
  kRequest = 0x01,
  kResponse = 0x02,
  kWaiting = 0x03,
  kSyncTag = 0x04,
  kSyncKeystream = 0x05,
  kPostamble = 0x06,
};

/// Identifies one derived sequence: (role, owner id, epoch, optional counter n).
/// Requests omit the counter; responses carry it.
struct SequenceLabel {
  SequenceRole role = SequenceRole::kRequest;
  std::uint32_t node_id = 0;
  std::uint64_t epoch = 0;
  std::optional<std::uint32_t> counter;

  bool operator==(const SequenceLabel&) const = default;
};

/// A +-1 symbol pattern of fixed length, tagged with its derivation label.
struct SymbolSequence {
  std::vector<std::int8_t> symbols;  // each exactly +1 or -1
  SequenceLabel label;

  std::size_t length() const { return symbols.size(); }
};

/// Complex sample stream at sample period T covering bandwidth B <= 1/T.
struct BasebandSignal {
  std::vector<cplx> samples;
  double sample_period = 1e-8;  // T, seconds
  double bandwidth = 1e8;       // B, Hz

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) * sample_period; }
  double energy() const {
    double e = 0.0;
    for (const cplx& s : samples) e += std::norm(s);
    return e;
  }
};

/// Cryptographically random waiting period T_W = T * (PRF mod W).
struct WaitingPeriod {
  double value = 0.0;        // seconds, in [0, W*T), multiple of T
  std::uint64_t ticks = 0;   // value / T
  std::uint32_t window = 1;  // W
  std::uint32_t index = 0;   // response counter n
};

/// Cartesian position in meters.
struct Position {
  double x = 0.0, y = 0.0, z = 0.0;

  double distance_to(const Position& other) const {
    double dx = x - other.x, dy = y - other.y, dz = z - other.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
  }
};

}  // namespace rangesim
