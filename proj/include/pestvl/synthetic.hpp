#pragma once

// Self-contained toy corpus: procedurally textured 32x32 classes plus the
// matching caption fixtures (knowledge entries, prompt template, offline
// captions, and a mock embedding store), all written under one directory so
// the full pipeline runs without any external data or endpoints.

#include <cstdint>
#include <string>
#include <vector>

namespace pestvl::synthetic {

struct ToyOptions {
  int classCount = 8;
  int perClass = 8;
  int imageSize = 32;
  uint64_t seed = 7;
  int embeddingDim = 32;
};

// Writes <dir>/<className>/img_###.png for every class plus captions.jsonl,
// embeddings.pvle, knowledge.json, and template.json at <dir>. Deterministic
// in the options. Returns the class names in classId order.
std::vector<std::string> writeToyDataset(const std::string& dir,
                                         const ToyOptions& opt = {});

}  // namespace pestvl::synthetic
