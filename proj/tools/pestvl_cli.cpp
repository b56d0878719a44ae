// pestvl: one binary for every pipeline stage — saliency maps, partition
// previews, caption generation, text encoding, dataset splits, training,
// evaluation, feature export, and the embedded self-test.
//
// Exit codes: 0 success, 2 usage, 3 configuration, 4 data, 5 runtime.
// Remote endpoints are configured through MLLM_API_URL and MLLM_API_KEY.

#include "pestvl/caption.hpp"
#include "pestvl/checkpoint.hpp"
#include "pestvl/config.hpp"
#include "pestvl/dataset.hpp"
#include "pestvl/errors.hpp"
#include "pestvl/image_io.hpp"
#include "pestvl/metrics.hpp"
#include "pestvl/mllm.hpp"
#include "pestvl/model.hpp"
#include "pestvl/partition.hpp"
#include "pestvl/selftest.hpp"
#include "pestvl/sha256.hpp"
#include "pestvl/spectral.hpp"
#include "pestvl/synthetic.hpp"
#include "pestvl/tensorio.hpp"
#include "pestvl/textencoder.hpp"
#include "pestvl/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pestvl;

namespace {

struct Common {
  std::string configPath;
  std::vector<std::string> overrides;
  bool jsonOut = false;
  int verbose = 0;
};

void addCommon(CLI::App* cmd, Common& c, bool withConfig = true) {
  if (withConfig) {
    cmd->add_option("--config", c.configPath, "Model config JSON file");
    cmd->add_option("--override", c.overrides,
                    "Dotted-path config override, e.g. optimizer.lr=0.05");
  }
  cmd->add_flag("--json", c.jsonOut, "Print a machine-readable JSON summary");
  cmd->add_flag("-v,--verbose", c.verbose, "Progress logging on stderr");
}

config::ModelConfig loadConfig(const Common& c) {
  config::ModelConfig cfg;
  if (!c.configPath.empty()) cfg = config::loadFile(c.configPath);
  return config::applyOverrides(std::move(cfg), c.overrides);
}

void emit(const Common& c, const json& summary, const std::string& human) {
  if (c.jsonOut) {
    std::cout << summary.dump() << '\n';
  } else if (!human.empty()) {
    std::cout << human << '\n';
  }
}

spectral::SaliencyOptions saliencyOptions(const config::ModelConfig& cfg) {
  spectral::SaliencyOptions opt;
  opt.epsilon = cfg.saliency.epsilon;
  opt.kernelSize = cfg.saliency.kernel;
  opt.exponentiate = cfg.saliency.exponentiate;
  opt.smoothSigma = cfg.saliency.sigma;
  return opt;
}

std::unique_ptr<text::TextEncoder> makeEncoder(const std::string& embeddings,
                                               const std::string& kind,
                                               int dim,
                                               const std::string& modelId) {
  if (!embeddings.empty()) {
    return std::make_unique<text::FileEncoder>(text::load(embeddings));
  }
  if (kind == "mock") return std::make_unique<text::MockEncoder>(dim);
  if (kind == "remote") {
    const auto env = mllm::fromEnvironment();
    text::RemoteEncoderConfig rc;
    rc.url = env.url;
    rc.apiKey = env.apiKey;
    rc.expectedDim = dim;
    if (!modelId.empty()) rc.modelId = modelId;
    return std::make_unique<text::RemoteEncoder>(rc);
  }
  throw ConfigError("unknown encoder kind: " + kind);
}

// ---------------------------------------------------------------- saliency

struct SaliencyArgs {
  Common common;
  std::string in, out, raw;
};

void runSaliency(const SaliencyArgs& a) {
  const config::ModelConfig cfg = loadConfig(a.common);
  const image::Image img = image::readImage(a.in);
  const Matrixd sal =
      spectral::saliencyMap(image::toGray(img), saliencyOptions(cfg));
  image::writePng(a.out, image::grayImage(sal));
  if (!a.raw.empty()) {
    tensorio::savePvlt(a.raw,
                       {tensorio::fromMatrix("saliency", sal.cast<float>())});
  }
  json j = {{"command", "saliency"}, {"in", a.in},
            {"out", a.out},          {"width", img.width},
            {"height", img.height},  {"max", sal.maxCoeff()},
            {"min", sal.minCoeff()}};
  if (!a.raw.empty()) j["raw"] = a.raw;
  emit(a.common, j, "wrote " + a.out);
}

// ----------------------------------------------------------- partition-viz

struct PartitionVizArgs {
  Common common;
  std::string in, out;
};

void runPartitionViz(const PartitionVizArgs& a) {
  const config::ModelConfig cfg = loadConfig(a.common);
  image::Image img = image::readImage(a.in);
  img = image::resizeBilinear(img, int(cfg.imageSize), int(cfg.imageSize));
  const Matrixd sal =
      spectral::saliencyMap(image::toGray(img), saliencyOptions(cfg));
  const Index side = cfg.featureSide();
  const Matrixd grid = spectral::averagePool(sal, cfg.imageSize / side,
                                             cfg.imageSize / side);
  const Vectord energies = partition::quadrantEnergy(grid, 2);
  const std::vector<Index> selected =
      partition::topkSelect(energies, cfg.topK);

  const int half = int(cfg.imageSize) / 2;
  for (int q = 0; q < 4; ++q) {
    const int y0 = (q / 2) * half, x0 = (q % 2) * half;
    image::drawRect(img, x0, y0, x0 + half - 1, y0 + half - 1, 255, 255, 255);
  }
  const int quarter = half / 2;
  for (Index q : selected) {
    const int y0 = int(q / 2) * half, x0 = int(q % 2) * half;
    for (int sy = 0; sy < 2; ++sy)
      for (int sx = 0; sx < 2; ++sx)
        image::drawRect(img, x0 + sx * quarter, y0 + sy * quarter,
                        x0 + (sx + 1) * quarter - 1,
                        y0 + (sy + 1) * quarter - 1, 255, 64, 64);
  }
  image::writePng(a.out, img);

  json j = {{"command", "partition-viz"},
            {"in", a.in},
            {"out", a.out},
            {"energies", std::vector<double>(energies.data(),
                                             energies.data() + energies.size())},
            {"selected", selected}};
  emit(a.common, j, "wrote " + a.out);
}

// ------------------------------------------------------------- caption-gen

struct CaptionGenArgs {
  Common common;
  std::string knowledge, tmplPath, out, context = "field photograph";
  std::string image;
  bool offline = false;
  int64_t timestamp = 0;
};

void runCaptionGen(const CaptionGenArgs& a) {
  const auto entries = caption::loadKnowledge(a.knowledge);
  const auto tmpl = caption::loadTemplate(a.tmplPath);
  std::string imageBytes;
  if (!a.image.empty()) {
    std::ifstream in(a.image, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + a.image);
    imageBytes.assign(std::istreambuf_iterator<char>(in), {});
  }

  std::vector<caption::CaptionRecord> records;
  if (a.offline) {
    for (const auto& e : entries) {
      records.push_back(mllm::offlineCaption("class:" + e.speciesName, e, tmpl,
                                             a.context));
    }
  } else {
    const auto cfg = mllm::fromEnvironment();
    for (const auto& e : entries) {
      if (a.common.verbose) std::cerr << "captioning " << e.speciesName << '\n';
      records.push_back(mllm::generateCaption(cfg, "class:" + e.speciesName, e,
                                              tmpl, a.context, imageBytes,
                                              a.timestamp));
    }
  }
  caption::saveRecords(a.out, records);

  json j = {{"command", "caption-gen"},
            {"out", a.out},
            {"count", records.size()},
            {"offline", a.offline}};
  emit(a.common, j,
       "wrote " + std::to_string(records.size()) + " captions to " + a.out);
}

// ------------------------------------------------------------- encode-text

struct EncodeTextArgs {
  Common common;
  std::string captions, out;
  std::string encoder = "mock";
  std::string modelId;
  int dim = 0;
};

void runEncodeText(const EncodeTextArgs& a) {
  const config::ModelConfig cfg = loadConfig(a.common);
  const int dim = a.dim > 0 ? a.dim : int(cfg.embeddingDim);
  auto enc = makeEncoder("", a.encoder, dim, a.modelId);

  text::EmbeddingStore store;
  const auto records = caption::loadRecords(a.captions);
  for (const auto& rec : records) {
    store.put(hash::sha256(rec.caption), enc->encode(rec.caption));
  }
  text::save(a.out, store);

  json j = {{"command", "encode-text"},
            {"out", a.out},
            {"count", store.entries.size()},
            {"dim", dim},
            {"encoder", enc->id()}};
  emit(a.common, j,
       "encoded " + std::to_string(store.entries.size()) + " captions to " +
           a.out);
}

// ------------------------------------------------------------------- split

struct SplitArgs {
  Common common;
  std::string root, out;
  uint64_t seed = 1;
  std::string ratio = "7:1:2";
  bool makeToy = false;
  int toyClasses = 8, toyPerClass = 8, toySize = 32, toyDim = 32;
};

std::array<int, 3> parseRatio(const std::string& text) {
  std::array<int, 3> ratio{};
  if (std::sscanf(text.c_str(), "%d:%d:%d", &ratio[0], &ratio[1], &ratio[2]) !=
          3 ||
      ratio[0] < 0 || ratio[1] < 0 || ratio[2] < 0 ||
      ratio[0] + ratio[1] + ratio[2] <= 0) {
    throw ConfigError("ratio must look like 7:1:2");
  }
  return ratio;
}

void runSplit(const SplitArgs& a) {
  if (a.makeToy) {
    synthetic::ToyOptions opt;
    opt.classCount = a.toyClasses;
    opt.perClass = a.toyPerClass;
    opt.imageSize = a.toySize;
    opt.embeddingDim = a.toyDim;
    opt.seed = a.seed;
    synthetic::writeToyDataset(a.root, opt);
  }
  const auto manifest =
      dataset::buildManifest(a.root, a.seed, parseRatio(a.ratio));
  dataset::saveManifest(a.out, manifest);

  json j = {{"command", "split"},
            {"root", a.root},
            {"out", a.out},
            {"classes", manifest.classNames},
            {"samples", manifest.samples.size()},
            {"train", manifest.trainIdx.size()},
            {"val", manifest.valIdx.size()},
            {"test", manifest.testIdx.size()}};
  emit(a.common, j,
       "split " + std::to_string(manifest.samples.size()) + " samples " +
           std::to_string(manifest.trainIdx.size()) + "/" +
           std::to_string(manifest.valIdx.size()) + "/" +
           std::to_string(manifest.testIdx.size()) + " into " + a.out);
}

// ------------------------------------------------------- shared data setup

struct DataArgs {
  std::string root, manifest, captions, embeddings;
};

void addDataArgs(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--root", d.root, "Dataset root directory")->required();
  cmd->add_option("--manifest", d.manifest,
                  "Manifest JSON (built from --root when absent)");
  cmd->add_option("--captions", d.captions,
                  "Caption JSONL (default <root>/captions.jsonl)");
  cmd->add_option("--embeddings", d.embeddings,
                  "PVLE embedding store (default <root>/embeddings.pvle, "
                  "else the mock encoder)");
}

dataset::DatasetManifest resolveManifest(const DataArgs& d, uint64_t seed) {
  if (!d.manifest.empty() && fs::exists(d.manifest)) {
    return dataset::loadManifest(d.manifest);
  }
  auto manifest = dataset::buildManifest(d.root, seed);
  if (!d.manifest.empty()) dataset::saveManifest(d.manifest, manifest);
  return manifest;
}

dataset::CaptionIndex resolveCaptions(const DataArgs& d,
                                      const config::ModelConfig& cfg,
                                      std::unique_ptr<text::TextEncoder>& enc) {
  std::string captions = d.captions;
  if (captions.empty()) captions = (fs::path(d.root) / "captions.jsonl").string();
  std::string embeddings = d.embeddings;
  if (embeddings.empty()) {
    const auto candidate = fs::path(d.root) / "embeddings.pvle";
    if (fs::exists(candidate)) embeddings = candidate.string();
  }
  enc = makeEncoder(embeddings, "mock", int(cfg.embeddingDim), "");
  if (enc->dimension() != int(cfg.embeddingDim)) {
    throw ConfigError("embedding store dimension " +
                      std::to_string(enc->dimension()) +
                      " does not match config embeddingDim " +
                      std::to_string(cfg.embeddingDim));
  }
  return dataset::CaptionIndex(captions, *enc);
}

std::vector<dataset::LoadedSample> loadSplit(
    const dataset::DatasetManifest& m, const std::vector<int>& idx,
    const config::ModelConfig& cfg, const dataset::CaptionIndex& captions,
    bool flip = false) {
  std::vector<dataset::LoadedSample> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(dataset::loadSample(m, i, cfg, captions, flip));
  return out;
}

json metricsJson(const train::MetricsRow& row) {
  return {{"epoch", row.epoch},   {"split", row.split},
          {"accuracy", row.accuracy}, {"precision", row.precision},
          {"f1", row.f1},         {"gm", row.gm},
          {"loss", row.loss}};
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  DataArgs data;
  std::string outDir = "runs/latest";
  std::string resume;
};

void runTrain(const TrainArgs& a) {
  config::ModelConfig cfg = loadConfig(a.common);
  std::optional<checkpoint::Checkpoint> resume;
  if (!a.resume.empty()) {
    resume = checkpoint::load(a.resume);
    const config::ModelConfig saved = config::fromJson(resume->configJson);
    if (a.common.configPath.empty() && a.common.overrides.empty()) {
      cfg = saved;
    } else if (config::toJson(cfg) != resume->configJson) {
      throw ConfigError("resume config does not match the checkpoint");
    }
  }

  const auto manifest = resolveManifest(a.data, cfg.optimizer.seed);
  if (int(manifest.classNames.size()) != cfg.classCount) {
    throw ConfigError("config classCount " + std::to_string(cfg.classCount) +
                      " does not match dataset classes " +
                      std::to_string(manifest.classNames.size()));
  }
  std::unique_ptr<text::TextEncoder> enc;
  const auto captions = resolveCaptions(a.data, cfg, enc);

  if (a.common.verbose) std::cerr << "loading samples\n";
  auto trainSamples = loadSplit(manifest, manifest.trainIdx, cfg, captions);
  auto valSamples = loadSplit(manifest, manifest.valIdx, cfg, captions);
  auto testSamples = loadSplit(manifest, manifest.testIdx, cfg, captions);
  std::vector<dataset::LoadedSample> flipped;
  if (cfg.optimizer.augmentFlip) {
    flipped = loadSplit(manifest, manifest.trainIdx, cfg, captions, true);
  }

  fs::create_directories(a.outDir);
  const std::string csvPath = (fs::path(a.outDir) / "metrics.csv").string();
  const std::string ckptPath =
      (fs::path(a.outDir) / "checkpoint.pvlc").string();

  train::Trainer trainer(cfg);
  trainer.setData(std::move(trainSamples), std::move(valSamples),
                  std::move(testSamples), std::move(flipped));
  if (resume) {
    trainer.restore(*resume);
  } else {
    trainer.initialize();
  }
  if (a.common.verbose) {
    trainer.onRow = [](const train::MetricsRow& row) {
      std::cerr << train::csvRow(row) << '\n';
    };
  }
  const auto result = trainer.run(csvPath, ckptPath);

  json rows = json::array();
  for (const auto& row : result.log) rows.push_back(metricsJson(row));
  const json j = {{"command", "train"},
                  {"epochs", result.epochsRun},
                  {"stoppedEarly", result.stoppedEarly},
                  {"finalTrainLoss", result.finalTrainLoss},
                  {"finalTrainAccuracy", result.finalTrainAccuracy},
                  {"metricsCsv", csvPath},
                  {"checkpoint", ckptPath},
                  {"log", rows}};
  emit(a.common, j,
       "trained " + std::to_string(result.epochsRun) + " epochs; final train "
       "accuracy " + std::to_string(result.finalTrainAccuracy) +
       "; artifacts in " + a.outDir);
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  DataArgs data;
  std::string ckpt;
  std::string split = "test";
  std::string outCsv;
};

void runEval(const EvalArgs& a) {
  const auto ckpt = checkpoint::load(a.ckpt);
  const config::ModelConfig cfg = config::fromJson(ckpt.configJson);

  const auto manifest = resolveManifest(a.data, cfg.optimizer.seed);
  std::unique_ptr<text::TextEncoder> enc;
  const auto captions = resolveCaptions(a.data, cfg, enc);

  train::Trainer trainer(cfg);
  trainer.restore(ckpt);

  std::vector<std::pair<std::string, const std::vector<int>*>> wanted;
  if (a.split == "train" || a.split == "all")
    wanted.emplace_back("train", &manifest.trainIdx);
  if (a.split == "val" || a.split == "all")
    wanted.emplace_back("val", &manifest.valIdx);
  if (a.split == "test" || a.split == "all")
    wanted.emplace_back("test", &manifest.testIdx);
  if (wanted.empty()) {
    throw ConfigError("split must be train, val, test, or all");
  }

  std::vector<train::MetricsRow> rows;
  for (const auto& [name, idx] : wanted) {
    if (idx->empty()) continue;
    const auto samples = loadSplit(manifest, *idx, cfg, captions);
    const auto ev = trainer.evaluate(samples);
    train::MetricsRow row;
    row.epoch = ckpt.epoch;
    row.split = name;
    row.accuracy = ev.report.accuracy;
    row.precision = cfg.weightedPrecision ? ev.report.weightedPrecision
                                          : ev.report.macroPrecision;
    row.f1 = ev.report.macroF1;
    row.gm = ev.report.geometricMean;
    row.loss = ev.loss;
    rows.push_back(row);
    for (const auto& w : ev.report.warnings) {
      std::cerr << "warning: " << name << ": " << w << '\n';
    }
  }
  if (rows.empty()) throw DataError("requested split is empty");
  if (!a.outCsv.empty()) train::writeCsv(a.outCsv, rows);

  json jrows = json::array();
  std::string human;
  for (const auto& row : rows) {
    jrows.push_back(metricsJson(row));
    if (!human.empty()) human += '\n';
    human += row.split + ": accuracy " + std::to_string(row.accuracy) +
             ", precision " + std::to_string(row.precision) + ", f1 " +
             std::to_string(row.f1) + ", gm " + std::to_string(row.gm) +
             ", loss " + std::to_string(row.loss);
  }
  json j = {{"command", "eval"}, {"checkpoint", a.ckpt}, {"rows", jrows}};
  if (!a.outCsv.empty()) j["out"] = a.outCsv;
  emit(a.common, j, human);
}

// --------------------------------------------------------- export-features

struct ExportArgs {
  Common common;
  std::string ckpt, in, outDir;
  std::string captionText;
  std::string embeddings;
  std::vector<int> stages;
};

void runExportFeatures(const ExportArgs& a) {
  const auto ckpt = checkpoint::load(a.ckpt);
  const config::ModelConfig cfg = config::fromJson(ckpt.configJson);

  image::Image img = image::readImage(a.in);
  img = image::resizeBilinear(img, int(cfg.imageSize), int(cfg.imageSize));
  const Matrixd sal =
      spectral::saliencyMap(image::toGray(img), saliencyOptions(cfg));
  const Index side = cfg.featureSide();
  const Matrixd grid = spectral::averagePool(sal, cfg.imageSize / side,
                                             cfg.imageSize / side);
  const Matrixf tokens = image::toTokens(img);

  auto enc = makeEncoder(a.embeddings, "mock", int(cfg.embeddingDim), "");
  const Matrixf captionRow = enc->encodeRow(a.captionText);

  graph::Graph<float> G;
  model::ModelGraph<float> M(G, cfg, ckpt.parameters);
  model::ModelGraph<float>::Taps taps;
  M.forward(tokens, grid, captionRow, nullptr, &taps);

  // Token-shaped taps only; the pooled row has no spatial layout.
  std::vector<std::pair<std::string, Matrixd>> maps;
  for (const auto& [name, node] : taps) {
    const Matrixf& value = G.value(node);
    if (value.rows() != side * side) continue;
    Matrixd mean(side, side);
    for (Index t = 0; t < side * side; ++t) {
      mean(t / side, t % side) = double(value.row(t).mean());
    }
    maps.emplace_back(name, spectral::minMaxNormalize(mean));
  }

  std::vector<size_t> chosen;
  if (a.stages.empty()) {
    for (size_t i = 0; i < maps.size(); ++i) chosen.push_back(i);
  } else {
    for (int sIdx : a.stages) {
      if (sIdx < 0 || size_t(sIdx) >= maps.size()) {
        throw ConfigError("stage index out of range: " + std::to_string(sIdx) +
                          " (have " + std::to_string(maps.size()) + ")");
      }
      chosen.push_back(size_t(sIdx));
    }
  }

  fs::create_directories(a.outDir);
  json written = json::array();
  std::string human;
  for (size_t i : chosen) {
    const auto& [name, map] = maps[i];
    const std::string path = (fs::path(a.outDir) / (name + ".png")).string();
    image::writePng(path, image::colormapJet(map));
    written.push_back({{"stage", name}, {"path", path}});
    if (!human.empty()) human += '\n';
    human += "wrote " + path;
  }
  const json j = {{"command", "export-features"},
                  {"in", a.in},
                  {"outDir", a.outDir},
                  {"written", written}};
  emit(a.common, j, human);
}

// --------------------------------------------------------------- self-test

void runSelfTest(const Common& c) {
  const auto results = selftest::runAll();
  bool allPassed = true;
  json suites = json::array();
  for (const auto& r : results) {
    allPassed &= r.passed;
    suites.push_back({{"name", r.name},
                      {"passed", r.passed},
                      {"maxError", r.maxError},
                      {"tolerance", r.tolerance},
                      {"note", r.note}});
    if (!c.jsonOut) {
      std::printf("%-10s %s  max error %.3e (tolerance %.0e) — %s\n",
                  r.name.c_str(), r.passed ? "PASS" : "FAIL", r.maxError,
                  r.tolerance, r.note.c_str());
    }
  }
  if (c.jsonOut) {
    std::cout << json{{"command", "self-test"},
                      {"passed", allPassed},
                      {"suites", suites}}
                     .dump()
              << '\n';
  }
  if (!allPassed) throw std::runtime_error("self-test failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "PestVL-Net: saliency-guided RWKV vision backbone with caption fusion"};
  app.require_subcommand(1);

  SaliencyArgs saliencyArgs;
  auto* saliencyCmd =
      app.add_subcommand("saliency", "Write the spectral-residual saliency "
                                     "map of an image as a grayscale PNG");
  saliencyCmd->add_option("--in", saliencyArgs.in, "Input PNG/JPEG")->required();
  saliencyCmd->add_option("--out", saliencyArgs.out, "Output PNG")->required();
  saliencyCmd->add_option("--raw", saliencyArgs.raw,
                          "Also dump the float map as a PVLT tensor file");
  addCommon(saliencyCmd, saliencyArgs.common);
  saliencyCmd->callback([&] { runSaliency(saliencyArgs); });

  PartitionVizArgs vizArgs;
  auto* vizCmd = app.add_subcommand(
      "partition-viz", "Preview the coarse/fine window selection for an image");
  vizCmd->add_option("--in", vizArgs.in, "Input PNG/JPEG")->required();
  vizCmd->add_option("--out", vizArgs.out, "Output PNG")->required();
  addCommon(vizCmd, vizArgs.common);
  vizCmd->callback([&] { runPartitionViz(vizArgs); });

  CaptionGenArgs capArgs;
  auto* capCmd = app.add_subcommand(
      "caption-gen", "Render expert-knowledge prompts and store captions "
                     "(remote endpoint or --offline)");
  capCmd->add_option("--knowledge", capArgs.knowledge,
                     "Expert knowledge JSON")->required();
  capCmd->add_option("--template", capArgs.tmplPath,
                     "Chain-of-thought template JSON")->required();
  capCmd->add_option("--out", capArgs.out, "Output caption JSONL")->required();
  capCmd->add_option("--context", capArgs.context, "Image context line");
  capCmd->add_option("--image", capArgs.image,
                     "Image file sent to the endpoint (online mode)");
  capCmd->add_option("--timestamp", capArgs.timestamp,
                     "Stored UTC timestamp (default 0 keeps output "
                     "deterministic)");
  capCmd->add_flag("--offline", capArgs.offline,
                   "Deterministic captions from the knowledge file alone");
  addCommon(capCmd, capArgs.common, false);
  capCmd->callback([&] { runCaptionGen(capArgs); });

  EncodeTextArgs encArgs;
  auto* encCmd = app.add_subcommand(
      "encode-text", "Embed stored captions into a PVLE store");
  encCmd->add_option("--captions", encArgs.captions, "Caption JSONL")
      ->required();
  encCmd->add_option("--out", encArgs.out, "Output PVLE store")->required();
  encCmd->add_option("--dim", encArgs.dim,
                     "Embedding dimension (default: config embeddingDim)");
  encCmd->add_option("--encoder", encArgs.encoder, "mock or remote")
      ->check(CLI::IsMember({"mock", "remote"}));
  encCmd->add_option("--model-id", encArgs.modelId,
                     "Remote encoder model id");
  addCommon(encCmd, encArgs.common);
  encCmd->callback([&] { runEncodeText(encArgs); });

  SplitArgs splitArgs;
  auto* splitCmd = app.add_subcommand(
      "split", "Build a stratified train/val/test manifest (optionally "
               "generating the toy corpus first)");
  splitCmd->add_option("--root", splitArgs.root, "Dataset root")->required();
  splitCmd->add_option("--out", splitArgs.out, "Manifest JSON")->required();
  splitCmd->add_option("--seed", splitArgs.seed, "Shuffle seed");
  splitCmd->add_option("--ratio", splitArgs.ratio, "Split ratio, e.g. 7:1:2");
  splitCmd->add_flag("--make-toy", splitArgs.makeToy,
                     "Write the procedural toy dataset into --root first");
  splitCmd->add_option("--toy-classes", splitArgs.toyClasses, "Toy classes");
  splitCmd->add_option("--toy-per-class", splitArgs.toyPerClass,
                       "Toy images per class");
  splitCmd->add_option("--toy-size", splitArgs.toySize, "Toy image side");
  splitCmd->add_option("--toy-dim", splitArgs.toyDim,
                       "Toy embedding dimension");
  addCommon(splitCmd, splitArgs.common, false);
  splitCmd->callback([&] { runSplit(splitArgs); });

  TrainArgs trainArgs;
  auto* trainCmd = app.add_subcommand("train", "Train from a dataset root");
  addDataArgs(trainCmd, trainArgs.data);
  trainCmd->add_option("--out-dir", trainArgs.outDir,
                       "Artifact directory (metrics.csv, checkpoint.pvlc)");
  trainCmd->add_option("--resume", trainArgs.resume,
                       "Resume from a PVLC checkpoint");
  addCommon(trainCmd, trainArgs.common);
  trainCmd->callback([&] { runTrain(trainArgs); });

  EvalArgs evalArgs;
  auto* evalCmd =
      app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  evalCmd->add_option("--checkpoint", evalArgs.ckpt, "PVLC checkpoint")
      ->required();
  addDataArgs(evalCmd, evalArgs.data);
  evalCmd->add_option("--split", evalArgs.split, "train, val, test, or all");
  evalCmd->add_option("--out", evalArgs.outCsv, "Optional metrics CSV");
  addCommon(evalCmd, evalArgs.common, false);
  evalCmd->callback([&] { runEval(evalArgs); });

  ExportArgs exportArgs;
  auto* exportCmd = app.add_subcommand(
      "export-features", "Write per-stage channel-mean feature heatmaps");
  exportCmd->add_option("--checkpoint", exportArgs.ckpt, "PVLC checkpoint")
      ->required();
  exportCmd->add_option("--in", exportArgs.in, "Input image")->required();
  exportCmd->add_option("--out-dir", exportArgs.outDir, "Output directory")
      ->required();
  exportCmd->add_option("--stages", exportArgs.stages,
                        "Stage indices into the tap list (default: all)");
  exportCmd->add_option("--caption", exportArgs.captionText,
                        "Caption text for the fusion branch");
  exportCmd->add_option("--embeddings", exportArgs.embeddings,
                        "PVLE store for caption lookup (default: mock "
                        "encoder)");
  addCommon(exportCmd, exportArgs.common, false);
  exportCmd->callback([&] { runExportFeatures(exportArgs); });

  Common selfTestCommon;
  auto* selfTestCmd = app.add_subcommand(
      "self-test", "Run the embedded oracle suites (DFT, saliency, WKV, "
                   "attention, gradients)");
  addCommon(selfTestCmd, selfTestCommon, false);
  selfTestCmd->callback([&] { runSelfTest(selfTestCommon); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help / --version
    }
    std::cerr << e.what() << "\n\n" << app.help() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 3;
  } catch (const AuthError& e) {
    std::cerr << "auth error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 5;
  }
  return 0;
}
