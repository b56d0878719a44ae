#include <doctest.h>

#include "pestvl/checkpoint.hpp"
#include "pestvl/sha256.hpp"
#include "pestvl/tensorio.hpp"
#include "pestvl/textencoder.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace pestvl;

namespace {

std::string tempPath(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "pestvl_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spill(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_CASE("sha256 matches published test vectors") {
  CHECK(hash::hex(hash::sha256(std::string())) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(hash::hex(hash::sha256(std::string("abc"))) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(hash::seedFrom(hash::sha256(std::string("abc"))) ==
        UINT64_C(0xba7816bf8f01cfea));
}

TEST_CASE("tensor records round-trip through a stream") {
  tensorio::NamedTensor t;
  t.name = "block0.spatial.wr";
  t.dims = {3, 4};
  t.data.resize(12);
  for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = float(i) * 0.25f - 1.0f;

  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  tensorio::writeTensor(ss, t);
  CHECK(tensorio::readTensor(ss) == t);

  tensorio::NamedTensor bad = t;
  bad.data.pop_back();
  std::stringstream ss2;
  CHECK_THROWS_AS(tensorio::writeTensor(ss2, bad), DataError);
}

TEST_CASE("matrix conversion preserves row-major layout") {
  Matrixf m(2, 3);
  m << 1, 2, 3,
       4, 5, 6;
  const auto t = tensorio::fromMatrix("m", m);
  REQUIRE(t.dims == std::vector<uint32_t>{2, 3});
  CHECK(t.data == std::vector<float>{1, 2, 3, 4, 5, 6});
  CHECK(tensorio::toMatrix(t) == m);

  tensorio::NamedTensor rank1;
  rank1.name = "v";
  rank1.dims = {3};
  rank1.data = {1, 2, 3};
  CHECK_THROWS_AS(tensorio::toMatrix(rank1), DataError);
}

TEST_CASE("feature dump write-read-write is byte identical") {
  std::vector<tensorio::NamedTensor> tensors;
  std::mt19937_64 gen(11);
  for (int i = 0; i < 3; ++i) {
    tensorio::NamedTensor t;
    t.name = "feature" + std::to_string(i);
    t.dims = {uint32_t(2 + i), 4};
    t.data.resize(size_t(t.dims[0]) * t.dims[1]);
    for (auto& v : t.data) v = float(gen() % 1000) / 7.0f;
    tensors.push_back(std::move(t));
  }
  const std::string p1 = tempPath("dump1.pvlt");
  const std::string p2 = tempPath("dump2.pvlt");
  tensorio::savePvlt(p1, tensors);
  const auto loaded = tensorio::loadPvlt(p1);
  CHECK(loaded == tensors);
  tensorio::savePvlt(p2, loaded);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("truncated and corrupted files raise data errors") {
  const std::string path = tempPath("trunc.pvlt");
  tensorio::savePvlt(path, {tensorio::fromMatrix("t", Matrixf::Ones(4, 4))});
  const std::string full = slurp(path);

  spill(path, full.substr(0, full.size() - 3));
  CHECK_THROWS_AS(tensorio::loadPvlt(path), DataError);

  std::string badMagic = full;
  badMagic[0] = 'X';
  spill(path, badMagic);
  CHECK_THROWS_AS(tensorio::loadPvlt(path), DataError);

  CHECK_THROWS_AS(tensorio::loadPvlt(tempPath("missing.pvlt")), DataError);
}

TEST_CASE("embedding store write-read-write is byte identical") {
  text::EmbeddingStore store;
  text::MockEncoder enc(16);
  for (const char* caption : {"aphid on a leaf", "moth at rest", "beetle larva"}) {
    store.put(hash::sha256(std::string(caption)), enc.encode(caption));
  }
  REQUIRE(store.dim == 16);

  const std::string p1 = tempPath("embed1.pvle");
  const std::string p2 = tempPath("embed2.pvle");
  text::save(p1, store);
  const auto loaded = text::load(p1);
  CHECK(loaded.dim == store.dim);
  CHECK(loaded.entries == store.entries);
  text::save(p2, loaded);
  CHECK(slurp(p1) == slurp(p2));

  // Replacement keeps a single entry per key.
  text::EmbeddingStore s2 = loaded;
  const auto key = hash::sha256(std::string("moth at rest"));
  s2.put(key, std::vector<float>(16, 0.25f));
  CHECK(s2.entries.size() == loaded.entries.size());
  CHECK((*s2.find(key))[0] == 0.25f);
  CHECK(s2.find(hash::sha256(std::string("unseen"))) == nullptr);

  CHECK_THROWS_AS(s2.put(key, std::vector<float>(8, 0.0f)), DataError);
}

TEST_CASE("mock encoder is deterministic and unit norm") {
  text::MockEncoder enc(64);
  const auto a = enc.encode("rice leaf roller");
  const auto b = enc.encode("rice leaf roller");
  const auto c = enc.encode("rice leaf roller!");
  CHECK(a == b);
  CHECK(a != c);
  double norm = 0.0;
  for (float v : a) norm += double(v) * double(v);
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("file encoder resolves hits and names misses") {
  text::EmbeddingStore store;
  text::MockEncoder mock(8);
  store.put(hash::sha256(std::string("known caption")), mock.encode("known caption"));
  text::FileEncoder enc(store);
  CHECK(enc.encode("known caption") == mock.encode("known caption"));
  CHECK_THROWS_WITH_AS(
      enc.encode("unknown caption"),
      ("no precomputed embedding for caption hash " +
       hash::hex(hash::sha256(std::string("unknown caption")))).c_str(),
      DataError);
}

TEST_CASE("checkpoint write-read-write is byte identical") {
  checkpoint::Checkpoint ckpt;
  ckpt.configJson = "{\n  \"imageSize\": 32\n}";
  std::mt19937_64 gen(99);
  auto randMat = [&](Index r, Index c) {
    Matrixf m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = float(gen() % 997) / 13.0f;
    return m;
  };
  ckpt.parameters.add("head.weight", randMat(4, 8));
  ckpt.parameters.add("head.bias", randMat(1, 4));
  ckpt.momentum.add("head.weight", randMat(4, 8));
  ckpt.momentum.add("head.bias", randMat(1, 4));
  ckpt.epoch = 17;
  gen.discard(123);
  std::ostringstream rng;
  rng << gen;
  ckpt.rngState = rng.str();

  const std::string p1 = tempPath("ckpt1.pvlc");
  const std::string p2 = tempPath("ckpt2.pvlc");
  checkpoint::save(p1, ckpt);
  const auto loaded = checkpoint::load(p1);
  CHECK(loaded.configJson == ckpt.configJson);
  CHECK(loaded.epoch == 17);
  CHECK(loaded.rngState == ckpt.rngState);
  CHECK(loaded.parameters.get("head.weight") == ckpt.parameters.get("head.weight"));
  CHECK(loaded.momentum.get("head.bias") == ckpt.momentum.get("head.bias"));
  checkpoint::save(p2, loaded);
  CHECK(slurp(p1) == slurp(p2));

  // The restored RNG stream continues exactly where the saved one paused.
  std::mt19937_64 restored;
  std::istringstream(loaded.rngState) >> restored;
  CHECK(restored() == gen());
}

TEST_CASE("checkpoint loader rejects a feature dump") {
  const std::string path = tempPath("notckpt.pvlt");
  tensorio::savePvlt(path, {tensorio::fromMatrix("t", Matrixf::Zero(2, 2))});
  CHECK_THROWS_AS(checkpoint::load(path), DataError);
}
