#include "rangesim/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/opensslv.h>

#include <stdexcept>

namespace rangesim::crypto {

std::array<std::uint8_t, 32> hmac_sha256(std::span<const std::uint8_t> key,
                                         std::span<const std::uint8_t> message) {
  std::array<std::uint8_t, 32> out{};
#if OPENSSL_VERSION_NUMBER >= 0x30000000L
  std::size_t out_len = 0;
  if (EVP_Q_mac(nullptr, "HMAC", nullptr, "SHA256", nullptr, key.data(), key.size(),
                message.data(), message.size(), out.data(), out.size(), &out_len) == nullptr ||
      out_len != out.size()) {
    throw std::runtime_error("hmac_sha256 failed");
  }
#else
  unsigned int out_len = 0;
  if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), message.data(), message.size(),
           out.data(), &out_len) == nullptr ||
      out_len != out.size()) {
    throw std::runtime_error("hmac_sha256 failed");
  }
#endif
  return out;
}

std::vector<std::uint8_t> expand(std::span<const std::uint8_t> key,
                                 std::span<const std::uint8_t> message, std::size_t n_octets) {
  std::vector<std::uint8_t> out;
  out.reserve(n_octets + 32);
  std::vector<std::uint8_t> block_msg(message.begin(), message.end());
  std::uint32_t block = 0;
  while (out.size() < n_octets) {
    block_msg.resize(message.size());
    put_be32(block_msg, block++);
    auto digest = hmac_sha256(key, block_msg);
    out.insert(out.end(), digest.begin(), digest.end());
  }
  out.resize(n_octets);
  return out;
}

}  // namespace rangesim::crypto
