#pragma once

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

namespace proglearn {

inline std::array<std::uint8_t, 32> sha256_digest(std::string_view bytes) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr);
  return out;
}

inline std::string sha256_hex(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  auto d = sha256_digest(bytes);
  std::string hex;
  hex.reserve(64);
  for (std::uint8_t b : d) {
    hex.push_back(digits[b >> 4]);
    hex.push_back(digits[b & 0xf]);
  }
  return hex;
}

inline int sha256_popcount(std::string_view bytes) {
  int total = 0;
  for (std::uint8_t b : sha256_digest(bytes)) total += std::popcount(static_cast<unsigned>(b));
  return total;
}

}  // namespace proglearn
