#include "pestvl/tensorio.hpp"

#include <cstring>
#include <fstream>
#include <limits>

namespace pestvl::tensorio {

namespace {

constexpr uint16_t kPvltVersion = 1;

void requireStream(std::istream& in, const char* what) {
  if (!in) throw DataError(std::string("truncated or unreadable ") + what);
}

}  // namespace

void writeBytes(std::ostream& out, const void* data, size_t len) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
}

void readBytes(std::istream& in, void* data, size_t len) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
  requireStream(in, "tensor stream");
}

void writeU16(std::ostream& out, uint16_t v) {
  const uint8_t b[2] = {uint8_t(v & 0xff), uint8_t(v >> 8)};
  writeBytes(out, b, 2);
}

void writeU32(std::ostream& out, uint32_t v) {
  const uint8_t b[4] = {uint8_t(v & 0xff), uint8_t((v >> 8) & 0xff),
                        uint8_t((v >> 16) & 0xff), uint8_t(v >> 24)};
  writeBytes(out, b, 4);
}

void writeF32(std::ostream& out, float v) {
  static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  writeU32(out, bits);
}

uint16_t readU16(std::istream& in) {
  uint8_t b[2];
  readBytes(in, b, 2);
  return uint16_t(b[0] | (uint16_t(b[1]) << 8));
}

uint32_t readU32(std::istream& in) {
  uint8_t b[4];
  readBytes(in, b, 4);
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
         (uint32_t(b[3]) << 24);
}

float readF32(std::istream& in) {
  const uint32_t bits = readU32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void writeTensor(std::ostream& out, const NamedTensor& t) {
  size_t expect = 1;
  for (uint32_t d : t.dims) expect *= d;
  if (t.dims.empty() || expect != t.data.size()) {
    throw DataError("tensor '" + t.name + "' has inconsistent dims");
  }
  writeU32(out, static_cast<uint32_t>(t.name.size()));
  writeBytes(out, t.name.data(), t.name.size());
  writeU32(out, static_cast<uint32_t>(t.dims.size()));
  for (uint32_t d : t.dims) writeU32(out, d);
  for (float v : t.data) writeF32(out, v);
}

NamedTensor readTensor(std::istream& in) {
  NamedTensor t;
  const uint32_t nameLen = readU32(in);
  if (nameLen > (1u << 16)) throw DataError("tensor name length implausible");
  t.name.resize(nameLen);
  if (nameLen) readBytes(in, t.name.data(), nameLen);
  const uint32_t rank = readU32(in);
  if (rank == 0 || rank > 8) throw DataError("tensor rank out of range");
  t.dims.resize(rank);
  size_t total = 1;
  for (uint32_t& d : t.dims) {
    d = readU32(in);
    total *= d;
  }
  if (total > (1u << 28)) throw DataError("tensor payload implausibly large");
  t.data.resize(total);
  for (float& v : t.data) v = readF32(in);
  return t;
}

void writeSection(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  writeU32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& t : tensors) writeTensor(out, t);
}

std::vector<NamedTensor> readSection(std::istream& in) {
  const uint32_t count = readU32(in);
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) tensors.push_back(readTensor(in));
  return tensors;
}

NamedTensor fromMatrix(const std::string& name, const Matrixf& m) {
  NamedTensor t;
  t.name = name;
  t.dims = {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())};
  t.data.reserve(static_cast<size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) t.data.push_back(m(r, c));
  }
  return t;
}

Matrixf toMatrix(const NamedTensor& t) {
  if (t.dims.size() != 2) {
    throw DataError("tensor '" + t.name + "' is not a matrix");
  }
  Matrixf m(static_cast<Index>(t.dims[0]), static_cast<Index>(t.dims[1]));
  size_t i = 0;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[i++];
  }
  return m;
}

void savePvlt(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write feature dump: " + path);
  writeBytes(out, "PVLT", 4);
  writeU16(out, kPvltVersion);
  writeSection(out, tensors);
  if (!out) throw DataError("failed writing feature dump: " + path);
}

std::vector<NamedTensor> loadPvlt(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature dump: " + path);
  char magic[4];
  readBytes(in, magic, 4);
  if (std::memcmp(magic, "PVLT", 4) != 0) {
    throw DataError("not a feature dump (bad magic): " + path);
  }
  const uint16_t version = readU16(in);
  if (version != kPvltVersion) throw DataError("unsupported feature dump version");
  return readSection(in);
}

}  // namespace pestvl::tensorio
