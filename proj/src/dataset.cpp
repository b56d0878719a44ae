#include "pestvl/dataset.hpp"

#include "pestvl/caption.hpp"
#include "pestvl/image_io.hpp"
#include "pestvl/spectral.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace pestvl::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

std::array<int, 3> splitCounts(int count, const std::array<int, 3>& ratio) {
  const int denom = ratio[0] + ratio[1] + ratio[2];
  if (count < 0 || denom <= 0) throw DataError("invalid split request");
  std::array<int, 3> counts{};
  std::array<int, 3> remainders{};  // numerators over denom, exact
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const int numerator = count * ratio[i];
    counts[i] = numerator / denom;
    remainders[i] = numerator % denom;
    assigned += counts[i];
  }
  for (int left = count - assigned; left > 0; --left) {
    int pick = 0;
    for (int i = 1; i < 3; ++i)
      if (remainders[i] > remainders[pick]) pick = i;
    ++counts[pick];
    remainders[pick] = -1;
  }
  return counts;
}

namespace {

bool isImageFile(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

DatasetManifest buildManifest(const std::string& root, uint64_t seed,
                              const std::array<int, 3>& ratio) {
  if (!fs::is_directory(root)) {
    throw DataError("dataset root is not a directory: " + root);
  }
  DatasetManifest m;
  m.root = root;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) m.classNames.push_back(entry.path().filename());
  }
  std::sort(m.classNames.begin(), m.classNames.end());
  if (m.classNames.empty()) {
    throw DataError("dataset root has no class directories: " + root);
  }

  std::mt19937_64 gen(seed);
  for (size_t classId = 0; classId < m.classNames.size(); ++classId) {
    const std::string& className = m.classNames[classId];
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(fs::path(root) / className)) {
      if (entry.is_regular_file() && isImageFile(entry.path())) {
        files.push_back(entry.path().filename());
      }
    }
    if (files.empty()) {
      throw DataError("class directory has no images: " + className);
    }
    std::sort(files.begin(), files.end());

    const int base = int(m.samples.size());
    for (const auto& f : files) {
      m.samples.push_back({className + "/" + f, int(classId)});
    }

    std::vector<int> order(files.size());
    std::iota(order.begin(), order.end(), base);
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[gen() % i]);
    }
    const auto counts = splitCounts(int(order.size()), ratio);
    auto it = order.begin();
    m.trainIdx.insert(m.trainIdx.end(), it, it + counts[0]);
    it += counts[0];
    m.valIdx.insert(m.valIdx.end(), it, it + counts[1]);
    it += counts[1];
    m.testIdx.insert(m.testIdx.end(), it, it + counts[2]);
  }
  return m;
}

void saveManifest(const std::string& path, const DatasetManifest& m) {
  json samples = json::array();
  for (const auto& s : m.samples) {
    samples.push_back({{"path", s.imagePath}, {"classId", s.classId}});
  }
  const json j = {{"root", m.root},
                  {"classNames", m.classNames},
                  {"samples", samples},
                  {"splits",
                   {{"train", m.trainIdx},
                    {"val", m.valIdx},
                    {"test", m.testIdx}}}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << j.dump(2) << '\n';
}

DatasetManifest loadManifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("manifest is not valid JSON: " + path + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.root = j.at("root").get<std::string>();
    m.classNames = j.at("classNames").get<std::vector<std::string>>();
    for (const auto& s : j.at("samples")) {
      m.samples.push_back({s.at("path").get<std::string>(),
                           s.at("classId").get<int>()});
    }
    m.trainIdx = j.at("splits").at("train").get<std::vector<int>>();
    m.valIdx = j.at("splits").at("val").get<std::vector<int>>();
    m.testIdx = j.at("splits").at("test").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw DataError("manifest is missing fields: " + path + ": " + e.what());
  }
  const int total = int(m.samples.size());
  for (const auto* split : {&m.trainIdx, &m.valIdx, &m.testIdx}) {
    for (int idx : *split) {
      if (idx < 0 || idx >= total) {
        throw DataError("manifest split index out of range: " + path);
      }
    }
  }
  for (const auto& s : m.samples) {
    if (s.classId < 0 || size_t(s.classId) >= m.classNames.size()) {
      throw DataError("manifest classId out of range: " + path);
    }
  }
  return m;
}

CaptionIndex::CaptionIndex(const std::string& captionsPath,
                           text::TextEncoder& encoder) {
  for (const auto& rec : caption::loadRecords(captionsPath)) {
    Matrixf row(1, encoder.dimension());
    const auto vec = encoder.encode(rec.caption);
    for (int i = 0; i < encoder.dimension(); ++i) row(0, i) = vec[size_t(i)];
    byId_.emplace_back(rec.imageId, std::move(row));
  }
}

const Matrixf* CaptionIndex::find(const std::string& id) const {
  for (const auto& [key, row] : byId_) {
    if (key == id) return &row;
  }
  return nullptr;
}

Matrixf CaptionIndex::embeddingFor(const std::string& relativePath,
                                   const std::string& className) const {
  if (const Matrixf* exact = find(relativePath)) return *exact;
  if (const Matrixf* classWide = find("class:" + className)) return *classWide;
  throw DataError("no caption for sample " + relativePath + " (or class:" +
                  className + ")");
}

LoadedSample loadSample(const DatasetManifest& m, int sampleIndex,
                        const config::ModelConfig& cfg,
                        const CaptionIndex& captions, bool flip) {
  if (sampleIndex < 0 || size_t(sampleIndex) >= m.samples.size()) {
    throw DataError("sample index out of range");
  }
  const Sample& s = m.samples[size_t(sampleIndex)];
  image::Image img =
      image::readImage((fs::path(m.root) / s.imagePath).string());
  img = image::resizeBilinear(img, int(cfg.imageSize), int(cfg.imageSize));
  if (flip) img = image::flipHorizontal(img);

  spectral::SaliencyOptions opt;
  opt.epsilon = cfg.saliency.epsilon;
  opt.kernelSize = cfg.saliency.kernel;
  opt.exponentiate = cfg.saliency.exponentiate;
  opt.smoothSigma = cfg.saliency.sigma;
  const Matrixd sal = spectral::saliencyMap(image::toGray(img), opt);
  const Index factor = cfg.imageSize / cfg.featureSide();

  LoadedSample out;
  out.image = image::toTokens(img);
  out.saliency = spectral::averagePool(sal, factor, factor);
  out.caption = captions.embeddingFor(s.imagePath, m.classNames[size_t(s.classId)]);
  out.label = s.classId;
  return out;
}

}  // namespace pestvl::dataset
