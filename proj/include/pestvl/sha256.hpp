#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace pestvl::hash {

using Digest = std::array<uint8_t, 32>;

Digest sha256(const void* data, size_t len);
Digest sha256(const std::string& text);
std::string hex(const Digest& d);

// Deterministic 64-bit seed from the leading digest bytes (big-endian).
uint64_t seedFrom(const Digest& d);

}  // namespace pestvl::hash
