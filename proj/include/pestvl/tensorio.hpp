#pragma once

// Little-endian binary tensor records shared by the checkpoint ("PVLC") and
// feature-dump ("PVLT") files: u32 name length, UTF-8 name, u32 rank, u32
// dims, then the row-major f32 payload. Sections prefix a u32 record count.

#include "pestvl/errors.hpp"
#include "pestvl/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pestvl::tensorio {

struct NamedTensor {
  std::string name;
  std::vector<uint32_t> dims;
  std::vector<float> data;  // row-major

  bool operator==(const NamedTensor&) const = default;
};

void writeU16(std::ostream& out, uint16_t v);
void writeU32(std::ostream& out, uint32_t v);
void writeF32(std::ostream& out, float v);
uint16_t readU16(std::istream& in);
uint32_t readU32(std::istream& in);
float readF32(std::istream& in);
void writeBytes(std::ostream& out, const void* data, size_t len);
void readBytes(std::istream& in, void* data, size_t len);

void writeTensor(std::ostream& out, const NamedTensor& t);
NamedTensor readTensor(std::istream& in);

void writeSection(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> readSection(std::istream& in);

NamedTensor fromMatrix(const std::string& name, const Matrixf& m);
Matrixf toMatrix(const NamedTensor& t);  // requires rank 2

// Feature dumps: magic "PVLT", u16 version, one tensor section.
void savePvlt(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> loadPvlt(const std::string& path);

}  // namespace pestvl::tensorio
