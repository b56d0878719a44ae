#pragma once

#include "pestvl/errors.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace pestvl::config {

struct SaliencyConfig {
  double epsilon = 1e-6;
  int kernel = 3;
  bool exponentiate = false;
  double sigma = 0.0;
};

struct OptimizerConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weightDecay = 0.0;
  int epochs = 200;
  int batchSize = 8;
  uint64_t seed = 1;
  std::string schedule = "constant";  // or "cosine"
  double stopAtTrainAccuracy = 0.0;   // 0 disables early stop
  bool augmentFlip = false;
  int checkpointEvery = 0;  // 0: final only
};

struct AblationConfig {
  bool convOnlyBackbone = false;
  bool disablePartition = false;
  bool disableFusion = false;
  bool disablePrompt = false;
};

struct ModelConfig {
  int imageSize = 224;
  int stemChannels = 32;
  int stageCount = 5;
  int fusionCount = 2;
  int classCount = 10;
  int embeddingDim = 512;
  int promptTokens = 4;
  int attentionDim = 64;
  int channelHidden = 0;  // 0 means stemChannels
  double gumbelTau = 1.0;
  bool hardMask = true;
  int topK = 1;
  bool learnDecay = true;
  bool weightedPrecision = false;
  SaliencyConfig saliency;
  OptimizerConfig optimizer;
  AblationConfig ablation;

  int hiddenChannels() const { return channelHidden > 0 ? channelHidden : stemChannels; }
  int featureSide() const { return imageSize / 4; }
  int tokenCount() const { return featureSide() * featureSide(); }
  int promptCount() const { return ablation.disablePrompt ? 0 : promptTokens; }
};

// Throws ConfigError on invalid values (invariants from the schema).
void validate(const ModelConfig& cfg);

// Parses JSON text; unknown keys are rejected with their dotted path.
ModelConfig fromJson(const std::string& text);
ModelConfig loadFile(const std::string& path);

// Canonical serialization (sorted keys, stable float formatting).
std::string toJson(const ModelConfig& cfg);

// Applies "a.b.c=value" assignments on top of a config; value text is coerced
// to the field's type. Unknown paths are rejected.
[[nodiscard]] ModelConfig applyOverrides(
    ModelConfig cfg, const std::vector<std::string>& overrides);

}  // namespace pestvl::config
