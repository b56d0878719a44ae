#include "pestvl/config.hpp"

#include <fstream>
#include <sstream>

namespace pestvl::config {

namespace {

using nlohmann::json;

json toJsonValue(const ModelConfig& c) {
  return json{
      {"imageSize", c.imageSize},
      {"stemChannels", c.stemChannels},
      {"stageCount", c.stageCount},
      {"fusionCount", c.fusionCount},
      {"classCount", c.classCount},
      {"embeddingDim", c.embeddingDim},
      {"promptTokens", c.promptTokens},
      {"attentionDim", c.attentionDim},
      {"channelHidden", c.channelHidden},
      {"gumbelTau", c.gumbelTau},
      {"hardMask", c.hardMask},
      {"topK", c.topK},
      {"learnDecay", c.learnDecay},
      {"weightedPrecision", c.weightedPrecision},
      {"saliency",
       {{"epsilon", c.saliency.epsilon},
        {"kernel", c.saliency.kernel},
        {"exponentiate", c.saliency.exponentiate},
        {"sigma", c.saliency.sigma}}},
      {"optimizer",
       {{"lr", c.optimizer.lr},
        {"momentum", c.optimizer.momentum},
        {"weightDecay", c.optimizer.weightDecay},
        {"epochs", c.optimizer.epochs},
        {"batchSize", c.optimizer.batchSize},
        {"seed", c.optimizer.seed},
        {"schedule", c.optimizer.schedule},
        {"stopAtTrainAccuracy", c.optimizer.stopAtTrainAccuracy},
        {"augmentFlip", c.optimizer.augmentFlip},
        {"checkpointEvery", c.optimizer.checkpointEvery}}},
      {"ablation",
       {{"convOnlyBackbone", c.ablation.convOnlyBackbone},
        {"disablePartition", c.ablation.disablePartition},
        {"disableFusion", c.ablation.disableFusion},
        {"disablePrompt", c.ablation.disablePrompt}}},
  };
}

void rejectUnknownKeys(const json& given, const json& schema,
                       const std::string& prefix) {
  for (const auto& [key, value] : given.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) {
      throw ConfigError("unknown config key: " + path);
    }
    if (value.is_object() != schema.at(key).is_object()) {
      throw ConfigError("config key has wrong structure: " + path);
    }
    if (value.is_object()) rejectUnknownKeys(value, schema.at(key), path);
  }
}

template <typename T>
void readInto(const json& j, const char* key, T& out, const std::string& prefix) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key has wrong type: " +
                      (prefix.empty() ? std::string(key) : prefix + "." + key));
  }
}

ModelConfig fromJsonValue(const json& j) {
  rejectUnknownKeys(j, toJsonValue(ModelConfig{}), "");
  ModelConfig c;
  readInto(j, "imageSize", c.imageSize, "");
  readInto(j, "stemChannels", c.stemChannels, "");
  readInto(j, "stageCount", c.stageCount, "");
  readInto(j, "fusionCount", c.fusionCount, "");
  readInto(j, "classCount", c.classCount, "");
  readInto(j, "embeddingDim", c.embeddingDim, "");
  readInto(j, "promptTokens", c.promptTokens, "");
  readInto(j, "attentionDim", c.attentionDim, "");
  readInto(j, "channelHidden", c.channelHidden, "");
  readInto(j, "gumbelTau", c.gumbelTau, "");
  readInto(j, "hardMask", c.hardMask, "");
  readInto(j, "topK", c.topK, "");
  readInto(j, "learnDecay", c.learnDecay, "");
  readInto(j, "weightedPrecision", c.weightedPrecision, "");
  if (j.contains("saliency")) {
    const auto& s = j.at("saliency");
    readInto(s, "epsilon", c.saliency.epsilon, "saliency");
    readInto(s, "kernel", c.saliency.kernel, "saliency");
    readInto(s, "exponentiate", c.saliency.exponentiate, "saliency");
    readInto(s, "sigma", c.saliency.sigma, "saliency");
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    readInto(o, "lr", c.optimizer.lr, "optimizer");
    readInto(o, "momentum", c.optimizer.momentum, "optimizer");
    readInto(o, "weightDecay", c.optimizer.weightDecay, "optimizer");
    readInto(o, "epochs", c.optimizer.epochs, "optimizer");
    readInto(o, "batchSize", c.optimizer.batchSize, "optimizer");
    readInto(o, "seed", c.optimizer.seed, "optimizer");
    readInto(o, "schedule", c.optimizer.schedule, "optimizer");
    readInto(o, "stopAtTrainAccuracy", c.optimizer.stopAtTrainAccuracy,
             "optimizer");
    readInto(o, "augmentFlip", c.optimizer.augmentFlip, "optimizer");
    readInto(o, "checkpointEvery", c.optimizer.checkpointEvery, "optimizer");
  }
  if (j.contains("ablation")) {
    const auto& a = j.at("ablation");
    readInto(a, "convOnlyBackbone", c.ablation.convOnlyBackbone, "ablation");
    readInto(a, "disablePartition", c.ablation.disablePartition, "ablation");
    readInto(a, "disableFusion", c.ablation.disableFusion, "ablation");
    readInto(a, "disablePrompt", c.ablation.disablePrompt, "ablation");
  }
  validate(c);
  return c;
}

}  // namespace

void validate(const ModelConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.imageSize < 16 || c.imageSize % 16 != 0) {
    fail("imageSize must be a positive multiple of 16 (stem stride 4 and a "
         "4-divisible feature grid)");
  }
  if (c.stemChannels < 1) fail("stemChannels must be positive");
  if (c.stageCount < 1) fail("stageCount must be positive");
  if (c.fusionCount < 1) fail("fusionCount must be positive");
  if (c.classCount < 2) fail("classCount must be at least 2");
  if (c.embeddingDim < 1) fail("embeddingDim must be positive");
  if (c.promptTokens < 0) fail("promptTokens must be nonnegative");
  if (c.attentionDim < 1) fail("attentionDim must be positive");
  if (c.channelHidden < 0) fail("channelHidden must be nonnegative");
  if (!(c.gumbelTau > 0.0)) fail("gumbelTau must be positive");
  if (c.topK < 1 || c.topK > 4) fail("topK must lie in [1, 4]");
  if (!(c.saliency.epsilon > 0.0)) fail("saliency.epsilon must be positive");
  if (c.saliency.kernel < 1 || c.saliency.kernel % 2 == 0) {
    fail("saliency.kernel must be odd and positive");
  }
  if (c.saliency.sigma < 0.0) fail("saliency.sigma must be nonnegative");
  if (!(c.optimizer.lr > 0.0)) fail("optimizer.lr must be positive");
  if (c.optimizer.momentum < 0.0 || c.optimizer.momentum >= 1.0) {
    fail("optimizer.momentum must lie in [0, 1)");
  }
  if (c.optimizer.weightDecay < 0.0) fail("optimizer.weightDecay must be nonnegative");
  if (c.optimizer.epochs < 0) fail("optimizer.epochs must be nonnegative");
  if (c.optimizer.batchSize < 1) fail("optimizer.batchSize must be positive");
  if (c.optimizer.schedule != "constant" && c.optimizer.schedule != "cosine") {
    fail("optimizer.schedule must be 'constant' or 'cosine'");
  }
  if (c.optimizer.stopAtTrainAccuracy < 0.0 ||
      c.optimizer.stopAtTrainAccuracy > 1.0) {
    fail("optimizer.stopAtTrainAccuracy must lie in [0, 1]");
  }
  if (c.optimizer.checkpointEvery < 0) fail("optimizer.checkpointEvery must be nonnegative");
}

ModelConfig fromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  return fromJsonValue(j);
}

ModelConfig loadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return fromJson(ss.str());
}

std::string toJson(const ModelConfig& cfg) { return toJsonValue(cfg).dump(2); }

ModelConfig applyOverrides(ModelConfig cfg,
                           const std::vector<std::string>& overrides) {
  json j = toJsonValue(cfg);
  for (const auto& text : overrides) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override must look like path.to.key=value: " + text);
    }
    const std::string path = text.substr(0, eq);
    const std::string value = text.substr(eq + 1);

    json* cursor = &j;
    size_t start = 0;
    while (true) {
      const size_t dot = path.find('.', start);
      const std::string key = path.substr(start, dot - start);
      if (!cursor->is_object() || !cursor->contains(key)) {
        throw ConfigError("unknown config key: " + path);
      }
      cursor = &cursor->at(key);
      if (dot == std::string::npos) break;
      start = dot + 1;
    }

    try {
      if (cursor->is_boolean()) {
        if (value == "true") {
          *cursor = true;
        } else if (value == "false") {
          *cursor = false;
        } else {
          throw ConfigError("expected true/false for " + path);
        }
      } else if (cursor->is_number_unsigned()) {
        *cursor = static_cast<uint64_t>(std::stoull(value));
      } else if (cursor->is_number_integer()) {
        *cursor = static_cast<int64_t>(std::stoll(value));
      } else if (cursor->is_number_float()) {
        *cursor = std::stod(value);
      } else if (cursor->is_string()) {
        *cursor = value;
      } else {
        throw ConfigError("cannot override structured key: " + path);
      }
    } catch (const std::invalid_argument&) {
      throw ConfigError("cannot parse override value for " + path + ": " + value);
    } catch (const std::out_of_range&) {
      throw ConfigError("override value out of range for " + path + ": " + value);
    }
  }
  return fromJsonValue(j);
}

}  // namespace pestvl::config
