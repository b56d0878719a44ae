#include "pestvl/synthetic.hpp"

#include "pestvl/caption.hpp"
#include "pestvl/errors.hpp"
#include "pestvl/image_io.hpp"
#include "pestvl/mllm.hpp"
#include "pestvl/sha256.hpp"
#include "pestvl/textencoder.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

namespace pestvl::synthetic {

namespace fs = std::filesystem;

namespace {

struct ClassSpec {
  const char* name;
  const char* colorWord;
  const char* patternWord;
  uint8_t r, g, b;
};

// Names stay in lexicographic order so directory scanning assigns the same
// class ids the generator used.
constexpr ClassSpec kSpecs[] = {
    {"aphid", "green", "horizontal banding", 96, 200, 96},
    {"armyworm", "brown", "vertical striping", 170, 120, 70},
    {"corn_borer", "tan", "checkered patches", 210, 190, 120},
    {"cutworm", "gray", "diagonal streaks", 140, 140, 150},
    {"leaf_beetle", "orange", "concentric rings", 230, 140, 50},
    {"leaf_roller", "yellow", "radial shading", 220, 210, 90},
    {"planthopper", "teal", "soft mottling", 70, 180, 170},
    {"weevil", "violet", "fine speckling", 150, 90, 200},
};

double pattern(int classId, double x, double y, double phase, double freq) {
  switch (classId % 8) {
    case 0: return 0.5 + 0.5 * std::sin(freq * y + phase);
    case 1: return 0.5 + 0.5 * std::sin(freq * x + phase);
    case 2:
      return (std::sin(freq * x + phase) * std::sin(freq * y + phase) > 0)
                 ? 1.0
                 : 0.0;
    case 3: return 0.5 + 0.5 * std::sin(freq * (x + y) + phase);
    case 4: {
      const double r = std::hypot(x - 16.0, y - 16.0);
      return 0.5 + 0.5 * std::sin(freq * r + phase);
    }
    case 5: {
      const double r = std::hypot(x - 16.0, y - 16.0);
      return std::max(0.0, 1.0 - r / 20.0);
    }
    case 6:
      return 0.5 +
             0.25 * (std::sin(0.35 * x + phase) + std::sin(0.35 * y - phase));
    default:
      return 0.5 + 0.5 * std::sin(freq * x * y * 0.05 + phase);
  }
}

}  // namespace

std::vector<std::string> writeToyDataset(const std::string& dir,
                                         const ToyOptions& opt) {
  if (opt.classCount < 1 || opt.classCount > 8) {
    throw ConfigError("toy dataset supports 1..8 classes");
  }
  if (opt.perClass < 1 || opt.imageSize < 8 || opt.embeddingDim < 1) {
    throw ConfigError("invalid toy dataset options");
  }
  fs::create_directories(dir);

  std::mt19937_64 gen(opt.seed);
  std::vector<std::string> classNames;
  std::vector<caption::ExpertKnowledgeEntry> knowledge;
  std::vector<caption::CaptionRecord> records;
  text::EmbeddingStore store;
  text::MockEncoder encoder(opt.embeddingDim);

  caption::CotTemplate tmpl;
  tmpl.version = "toy-v1";
  tmpl.steps = {"You are identifying a crop pest from a photo.",
                "Likely species: {species}.",
                "Expected field marks: {attributes}.",
                "Scene: {image_context}.",
                "Describe the animal in one factual sentence."};

  for (int classId = 0; classId < opt.classCount; ++classId) {
    const ClassSpec& spec = kSpecs[classId];
    classNames.push_back(spec.name);
    fs::create_directories(fs::path(dir) / spec.name);

    for (int i = 0; i < opt.perClass; ++i) {
      const double phase = 2.0 * M_PI * double(gen() % 1000) / 1000.0;
      const double freq = 0.6 + 0.2 * double(gen() % 5);
      const int jr = int(gen() % 41) - 20;
      const int jg = int(gen() % 41) - 20;
      const int jb = int(gen() % 41) - 20;

      image::Image img;
      img.width = img.height = opt.imageSize;
      img.channels = 3;
      img.pixels.resize(size_t(opt.imageSize) * size_t(opt.imageSize) * 3);
      for (int y = 0; y < opt.imageSize; ++y) {
        for (int x = 0; x < opt.imageSize; ++x) {
          const double p = pattern(classId, x, y, phase, freq);
          const double shade = 0.35 + 0.65 * p;
          auto px = [&](int base, int jitter) {
            const double v = double(base + jitter) * shade;
            return uint8_t(std::min(255.0, std::max(0.0, v)));
          };
          img.at(y, x, 0) = px(spec.r, jr);
          img.at(y, x, 1) = px(spec.g, jg);
          img.at(y, x, 2) = px(spec.b, jb);
        }
      }
      char name[32];
      std::snprintf(name, sizeof(name), "img_%03d.png", i);
      image::writePng((fs::path(dir) / spec.name / name).string(), img);
    }

    caption::ExpertKnowledgeEntry entry;
    entry.speciesName = spec.name;
    entry.attributes = {{"color", std::string(spec.colorWord) + " body"},
                        {"markings", spec.patternWord}};
    knowledge.push_back(entry);

    auto rec = mllm::offlineCaption("class:" + std::string(spec.name), entry,
                                    tmpl, "synthetic texture sample");
    store.put(hash::sha256(rec.caption),
              encoder.encode(rec.caption));
    records.push_back(std::move(rec));
  }

  caption::saveRecords((fs::path(dir) / "captions.jsonl").string(), records);
  text::save((fs::path(dir) / "embeddings.pvle").string(), store);

  nlohmann::json kj = nlohmann::json::array();
  for (const auto& e : knowledge) {
    nlohmann::json attrs = nlohmann::json::array();
    for (const auto& a : e.attributes) {
      attrs.push_back({{"facet", a.facet}, {"description", a.description}});
    }
    kj.push_back({{"species", e.speciesName}, {"attributes", attrs}});
  }
  std::ofstream((fs::path(dir) / "knowledge.json").string()) << kj.dump(2) << '\n';

  const nlohmann::json tj = {{"version", tmpl.version}, {"steps", tmpl.steps}};
  std::ofstream((fs::path(dir) / "template.json").string()) << tj.dump(2) << '\n';

  return classNames;
}

}  // namespace pestvl::synthetic
