#pragma once

// Caption embedding plumbing: a byte-exact binary store ("PVLE") keyed by
// caption SHA-256, and the TextEncoder interface with three backends — a
// deterministic unit-norm mock, a file-backed lookup over a store, and a
// remote HTTP encoder.

#include "pestvl/errors.hpp"
#include "pestvl/sha256.hpp"
#include "pestvl/types.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace pestvl::text {

struct EmbeddingStore {
  uint32_t dim = 0;
  std::vector<std::pair<hash::Digest, std::vector<float>>> entries;

  // Replaces an existing key in place, otherwise appends.
  void put(const hash::Digest& key, std::vector<float> vec);
  const std::vector<float>* find(const hash::Digest& key) const;
};

void save(const std::string& path, const EmbeddingStore& store);
EmbeddingStore load(const std::string& path);

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual int dimension() const = 0;
  virtual std::string id() const = 0;
  virtual std::vector<float> encode(const std::string& caption) = 0;

  Matrixf encodeRow(const std::string& caption);  // 1 x D
};

// Hash-seeded Gaussian draws normalized to unit Euclidean norm; the same
// caption always encodes to the same vector.
class MockEncoder : public TextEncoder {
 public:
  explicit MockEncoder(int dim);
  int dimension() const override { return dim_; }
  std::string id() const override { return "mock"; }
  std::vector<float> encode(const std::string& caption) override;

 private:
  int dim_;
};

// Lookup over a precomputed store; a missing caption is a DataError naming
// the caption hash.
class FileEncoder : public TextEncoder {
 public:
  explicit FileEncoder(EmbeddingStore store);
  int dimension() const override { return int(store_.dim); }
  std::string id() const override { return "file"; }
  std::vector<float> encode(const std::string& caption) override;

 private:
  EmbeddingStore store_;
};

// POSTs the caption to an embedding endpoint; declared here, transport lives
// with the MLLM client.
struct RemoteEncoderConfig {
  std::string url;
  std::string apiKey;
  std::string modelId = "text-encoder";
  int expectedDim = 0;
  int maxAttempts = 3;
  int backoffBaseMs = 200;
  int timeoutSeconds = 30;
};

class RemoteEncoder : public TextEncoder {
 public:
  explicit RemoteEncoder(RemoteEncoderConfig cfg);
  int dimension() const override { return cfg_.expectedDim; }
  std::string id() const override { return "remote:" + cfg_.modelId; }
  std::vector<float> encode(const std::string& caption) override;

 private:
  RemoteEncoderConfig cfg_;
};

}  // namespace pestvl::text
