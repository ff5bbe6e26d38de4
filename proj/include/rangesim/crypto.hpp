#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace rangesim::crypto {

/// HMAC-SHA-256 of `message` under `key`.
std::array<std::uint8_t, 32> hmac_sha256(std::span<const std::uint8_t> key,
                                         std::span<const std::uint8_t> message);

/// Counter-mode expansion: HMAC(key, message || be32(block)) for block = 0,1,...
/// concatenated and truncated to `n_octets`.
std::vector<std::uint8_t> expand(std::span<const std::uint8_t> key,
                                 std::span<const std::uint8_t> message, std::size_t n_octets);

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_be64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  put_be32(out, static_cast<std::uint32_t>(v >> 32));
  put_be32(out, static_cast<std::uint32_t>(v));
}

}  // namespace rangesim::crypto
