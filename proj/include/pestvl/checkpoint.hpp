#pragma once

// Single-file training checkpoint ("PVLC"): versioned header, the canonical
// config JSON, then three tensor sections — parameters, optimizer state
// (momentum buffers plus the epoch counter), and the RNG state (its decimal
// text serialization stored byte-per-float). save→load→save is byte-exact.

#include "pestvl/params.hpp"
#include "pestvl/tensorio.hpp"

#include <string>

namespace pestvl::checkpoint {

struct Checkpoint {
  std::string configJson;
  params::ParamSet<float> parameters;
  params::ParamSet<float> momentum;  // same names as parameters
  int epoch = 0;
  std::string rngState;  // std::mt19937_64 stream serialization
};

void save(const std::string& path, const Checkpoint& ckpt);
Checkpoint load(const std::string& path);

}  // namespace pestvl::checkpoint
