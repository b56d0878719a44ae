#include <doctest.h>

#include "pestvl/config.hpp"

#include <cstdio>
#include <fstream>

using namespace pestvl;
using config::ModelConfig;

TEST_CASE("default config validates and round-trips through JSON") {
  ModelConfig def;
  CHECK_NOTHROW(config::validate(def));

  const std::string text = config::toJson(def);
  ModelConfig back = config::fromJson(text);
  CHECK(config::toJson(back) == text);
  CHECK(back.imageSize == def.imageSize);
  CHECK(back.optimizer.lr == def.optimizer.lr);
  CHECK(back.saliency.kernel == def.saliency.kernel);
  CHECK(back.ablation.disableFusion == def.ablation.disableFusion);
}

TEST_CASE("partial JSON keeps defaults for absent keys") {
  ModelConfig c = config::fromJson(R"({"imageSize": 32, "classCount": 8})");
  CHECK(c.imageSize == 32);
  CHECK(c.classCount == 8);
  CHECK(c.stageCount == ModelConfig{}.stageCount);
  CHECK(c.optimizer.momentum == ModelConfig{}.optimizer.momentum);
}

TEST_CASE("unknown keys are rejected with their dotted path") {
  CHECK_THROWS_WITH_AS(config::fromJson(R"({"imageSizes": 32})"),
                       "unknown config key: imageSizes", ConfigError);
  CHECK_THROWS_WITH_AS(config::fromJson(R"({"optimizer": {"lrr": 0.1}})"),
                       "unknown config key: optimizer.lrr", ConfigError);
  CHECK_THROWS_WITH_AS(config::fromJson(R"({"saliency": {"Kernel": 3}})"),
                       "unknown config key: saliency.Kernel", ConfigError);
}

TEST_CASE("wrong types and malformed JSON raise ConfigError") {
  CHECK_THROWS_AS(config::fromJson(R"({"imageSize": "big"})"), ConfigError);
  CHECK_THROWS_AS(config::fromJson(R"({"optimizer": 3})"), ConfigError);
  CHECK_THROWS_AS(config::fromJson("not json at all"), ConfigError);
  CHECK_THROWS_AS(config::fromJson("[1, 2, 3]"), ConfigError);
}

TEST_CASE("validation enforces the documented invariants") {
  auto withJson = [](const std::string& body) { return config::fromJson(body); };
  // imageSize must keep the post-stem grid divisible by the fine partition.
  CHECK_THROWS_AS(withJson(R"({"imageSize": 20})"), ConfigError);
  CHECK_THROWS_AS(withJson(R"({"imageSize": 0})"), ConfigError);
  CHECK_THROWS_AS(withJson(R"({"classCount": 1})"), ConfigError);
  CHECK_THROWS_AS(withJson(R"({"gumbelTau": 0})"), ConfigError);
  CHECK_THROWS_AS(withJson(R"({"topK": 5})"), ConfigError);
  CHECK_THROWS_AS(withJson(R"({"topK": 0})"), ConfigError);
  CHECK_THROWS_AS(withJson(R"({"saliency": {"kernel": 4}})"), ConfigError);
  CHECK_THROWS_AS(withJson(R"({"saliency": {"epsilon": 0}})"), ConfigError);
  CHECK_THROWS_AS(withJson(R"({"optimizer": {"lr": 0}})"), ConfigError);
  CHECK_THROWS_AS(withJson(R"({"optimizer": {"momentum": 1.0}})"), ConfigError);
  CHECK_THROWS_AS(withJson(R"({"optimizer": {"schedule": "step"}})"), ConfigError);
  CHECK_THROWS_AS(withJson(R"({"optimizer": {"batchSize": 0}})"), ConfigError);
  CHECK_THROWS_AS(withJson(R"({"optimizer": {"stopAtTrainAccuracy": 1.5}})"),
                  ConfigError);
  CHECK_NOTHROW(withJson(R"({"imageSize": 32})"));
  CHECK_NOTHROW(withJson(R"({"optimizer": {"schedule": "cosine"}})"));
}

TEST_CASE("overrides navigate dotted paths and coerce value text") {
  ModelConfig c = config::applyOverrides(
      ModelConfig{}, {"imageSize=64", "optimizer.epochs=3", "optimizer.lr=0.05",
                      "optimizer.schedule=cosine", "ablation.disableFusion=true",
                      "optimizer.seed=42"});
  CHECK(c.imageSize == 64);
  CHECK(c.optimizer.epochs == 3);
  CHECK(c.optimizer.lr == doctest::Approx(0.05));
  CHECK(c.optimizer.schedule == "cosine");
  CHECK(c.ablation.disableFusion);
  CHECK(c.optimizer.seed == 42);
}

TEST_CASE("bad overrides are rejected") {
  auto apply = [](std::vector<std::string> ov) {
    return config::applyOverrides(ModelConfig{}, ov);
  };
  CHECK_THROWS_WITH_AS(apply({"nope=1"}), "unknown config key: nope", ConfigError);
  CHECK_THROWS_WITH_AS(apply({"optimizer.nope=1"}),
                       "unknown config key: optimizer.nope", ConfigError);
  CHECK_THROWS_AS(apply({"optimizer"}), ConfigError);
  CHECK_THROWS_AS(apply({"=true"}), ConfigError);
  CHECK_THROWS_AS(apply({"imageSize=banana"}), ConfigError);
  CHECK_THROWS_AS(apply({"hardMask=maybe"}), ConfigError);
  CHECK_THROWS_AS(apply({"saliency=3"}), ConfigError);
  // Coerced values still pass through validation.
  CHECK_THROWS_AS(apply({"imageSize=20"}), ConfigError);
}

TEST_CASE("loadFile reads a config and reports missing files") {
  const std::string path = "test_config_tmp.json";
  {
    std::ofstream out(path);
    out << R"({"imageSize": 48, "optimizer": {"epochs": 7}})";
  }
  ModelConfig c = config::loadFile(path);
  CHECK(c.imageSize == 48);
  CHECK(c.optimizer.epochs == 7);
  std::remove(path.c_str());
  CHECK_THROWS_AS(config::loadFile("definitely_missing.json"), ConfigError);
}

TEST_CASE("derived helpers reflect the ablation switches") {
  ModelConfig c = config::fromJson(R"({"imageSize": 32, "channelHidden": 0,
                                       "stemChannels": 12, "promptTokens": 4})");
  CHECK(c.featureSide() == 8);
  CHECK(c.tokenCount() == 64);
  CHECK(c.hiddenChannels() == 12);
  CHECK(c.promptCount() == 4);
  c.channelHidden = 5;
  CHECK(c.hiddenChannels() == 5);
  c.ablation.disablePrompt = true;
  CHECK(c.promptCount() == 0);
}
