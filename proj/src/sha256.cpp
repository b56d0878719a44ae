#include "pestvl/sha256.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace pestvl::hash {

Digest sha256(const void* data, size_t len) {
  Digest out{};
  unsigned int written = 0;
  if (EVP_Digest(data, len, out.data(), &written, EVP_sha256(), nullptr) != 1 ||
      written != out.size()) {
    throw std::runtime_error("sha256: digest computation failed");
  }
  return out;
}

Digest sha256(const std::string& text) { return sha256(text.data(), text.size()); }

std::string hex(const Digest& d) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (uint8_t b : d) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

uint64_t seedFrom(const Digest& d) {
  uint64_t seed = 0;
  for (int i = 0; i < 8; ++i) seed = (seed << 8) | d[static_cast<size_t>(i)];
  return seed;
}

}  // namespace pestvl::hash
