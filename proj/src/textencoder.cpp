#include "pestvl/textencoder.hpp"

#include "pestvl/mllm.hpp"
#include "pestvl/tensorio.hpp"
#include "pestvl/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace pestvl::text {

namespace {
constexpr uint16_t kVersion = 1;
}

void EmbeddingStore::put(const hash::Digest& key, std::vector<float> vec) {
  if (dim == 0) dim = static_cast<uint32_t>(vec.size());
  if (vec.size() != dim) {
    throw DataError("embedding dimension mismatch in store");
  }
  for (auto& e : entries) {
    if (e.first == key) {
      e.second = std::move(vec);
      return;
    }
  }
  entries.emplace_back(key, std::move(vec));
}

const std::vector<float>* EmbeddingStore::find(const hash::Digest& key) const {
  for (const auto& e : entries) {
    if (e.first == key) return &e.second;
  }
  return nullptr;
}

void save(const std::string& path, const EmbeddingStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write embedding store: " + path);
  tensorio::writeBytes(out, "PVLE", 4);
  tensorio::writeU16(out, kVersion);
  tensorio::writeU32(out, static_cast<uint32_t>(store.entries.size()));
  tensorio::writeU32(out, store.dim);
  for (const auto& [key, vec] : store.entries) {
    if (vec.size() != store.dim) {
      throw DataError("embedding store entry has wrong dimension");
    }
    tensorio::writeBytes(out, key.data(), key.size());
    for (float v : vec) tensorio::writeF32(out, v);
  }
  if (!out) throw DataError("failed writing embedding store: " + path);
}

EmbeddingStore load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding store: " + path);
  char magic[4];
  tensorio::readBytes(in, magic, 4);
  if (std::memcmp(magic, "PVLE", 4) != 0) {
    throw DataError("not an embedding store (bad magic): " + path);
  }
  if (tensorio::readU16(in) != kVersion) {
    throw DataError("unsupported embedding store version: " + path);
  }
  EmbeddingStore store;
  const uint32_t count = tensorio::readU32(in);
  store.dim = tensorio::readU32(in);
  if (store.dim == 0 && count > 0) {
    throw DataError("embedding store declares zero dimension");
  }
  store.entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    hash::Digest key{};
    tensorio::readBytes(in, key.data(), key.size());
    std::vector<float> vec(store.dim);
    for (float& v : vec) v = tensorio::readF32(in);
    store.entries.emplace_back(key, std::move(vec));
  }
  return store;
}

Matrixf TextEncoder::encodeRow(const std::string& caption) {
  const std::vector<float> v = encode(caption);
  Matrixf row(1, static_cast<Index>(v.size()));
  for (Index i = 0; i < row.cols(); ++i) row(0, i) = v[static_cast<size_t>(i)];
  return row;
}

MockEncoder::MockEncoder(int dim) : dim_(dim) {
  if (dim < 1) throw ConfigError("mock encoder dimension must be positive");
}

std::vector<float> MockEncoder::encode(const std::string& caption) {
  std::mt19937_64 gen(hash::seedFrom(hash::sha256(caption)));
  std::vector<float> v(static_cast<size_t>(dim_));
  double norm2 = 0.0;
  for (auto& x : v) {
    const double g = gaussian(gen);
    x = static_cast<float>(g);
    norm2 += g * g;
  }
  const float inv = norm2 > 0.0 ? float(1.0 / std::sqrt(norm2)) : 1.0f;
  for (auto& x : v) x *= inv;
  return v;
}

FileEncoder::FileEncoder(EmbeddingStore store) : store_(std::move(store)) {}

std::vector<float> FileEncoder::encode(const std::string& caption) {
  const hash::Digest key = hash::sha256(caption);
  const auto* vec = store_.find(key);
  if (!vec) {
    throw DataError("no precomputed embedding for caption hash " +
                    hash::hex(key));
  }
  return *vec;
}

RemoteEncoder::RemoteEncoder(RemoteEncoderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.url.empty()) throw ConfigError("remote encoder needs a URL");
  if (cfg_.expectedDim < 1) {
    throw ConfigError("remote encoder needs the expected dimension");
  }
}

std::vector<float> RemoteEncoder::encode(const std::string& caption) {
  const nlohmann::json req = {{"model", cfg_.modelId}, {"input", caption}};
  const std::string body =
      mllm::postJson(cfg_.url, cfg_.apiKey, req.dump(), cfg_.maxAttempts,
                     cfg_.backoffBaseMs, cfg_.timeoutSeconds);
  nlohmann::json rep;
  try {
    rep = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw MalformedResponseError("embedding response is not JSON");
  }
  if (!rep.contains("embedding") || !rep["embedding"].is_array()) {
    throw MalformedResponseError("embedding response lacks an embedding array");
  }
  std::vector<float> v;
  v.reserve(rep["embedding"].size());
  for (const auto& x : rep["embedding"]) {
    if (!x.is_number()) {
      throw MalformedResponseError("embedding array holds a non-number");
    }
    v.push_back(x.get<float>());
  }
  if (static_cast<int>(v.size()) != cfg_.expectedDim) {
    throw MalformedResponseError("embedding dimension mismatch: got " +
                                 std::to_string(v.size()));
  }
  return v;
}

}  // namespace pestvl::text
