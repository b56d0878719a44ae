#pragma once

// Dataset discovery and splitting. The on-disk layout is root/className/
// image files; the manifest caches the class list, per-sample paths, and the
// stratified train/val/test split as JSON. Splits use largest-remainder
// rounding per class over a seeded per-class shuffle, so 10 images per class
// divide exactly 7:1:2.

#include "pestvl/config.hpp"
#include "pestvl/errors.hpp"
#include "pestvl/textencoder.hpp"
#include "pestvl/types.hpp"

#include <array>
#include <random>
#include <string>
#include <vector>

namespace pestvl::dataset {

struct Sample {
  std::string imagePath;  // relative to root
  int classId = 0;
  bool operator==(const Sample&) const = default;
};

struct DatasetManifest {
  std::string root;
  std::vector<std::string> classNames;
  std::vector<Sample> samples;
  std::vector<int> trainIdx, valIdx, testIdx;
};

// Per-class sample counts for a total of `count` at the given ratio,
// largest-remainder rounding, remainder ties resolved in split order.
std::array<int, 3> splitCounts(int count, const std::array<int, 3>& ratio);

DatasetManifest buildManifest(const std::string& root, uint64_t seed,
                              const std::array<int, 3>& ratio = {7, 1, 2});

void saveManifest(const std::string& path, const DatasetManifest& m);
DatasetManifest loadManifest(const std::string& path);

// One sample prepared for the model: input tokens, the saliency energy grid
// pooled to feature resolution, the caption embedding row, and the label.
struct LoadedSample {
  Matrixf image;      // (S*S) x 3 in [-0.5, 0.5]
  Matrixd saliency;   // featureSide x featureSide
  Matrixf caption;    // 1 x D
  int label = 0;
};

// Caption lookup: exact record for the sample's relative path, else the
// class-level record "class:<className>".
class CaptionIndex {
 public:
  CaptionIndex(const std::string& captionsPath, text::TextEncoder& encoder);

  // 1 x D embedding for a sample; missing caption is a DataError.
  Matrixf embeddingFor(const std::string& relativePath,
                       const std::string& className) const;

 private:
  std::vector<std::pair<std::string, Matrixf>> byId_;  // imageId -> embedding
  const Matrixf* find(const std::string& id) const;
};

LoadedSample loadSample(const DatasetManifest& m, int sampleIndex,
                        const config::ModelConfig& cfg,
                        const CaptionIndex& captions, bool flip = false);

}  // namespace pestvl::dataset
