#include "pestvl/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace pestvl::checkpoint {

namespace {

constexpr uint16_t kVersion = 1;

using tensorio::NamedTensor;

std::vector<NamedTensor> packParams(const params::ParamSet<float>& ps) {
  std::vector<NamedTensor> out;
  out.reserve(ps.size());
  for (const auto& e : ps) out.push_back(tensorio::fromMatrix(e.name, e.value));
  return out;
}

params::ParamSet<float> unpackParams(const std::vector<NamedTensor>& tensors) {
  params::ParamSet<float> ps;
  for (const auto& t : tensors) ps.add(t.name, tensorio::toMatrix(t));
  return ps;
}

}  // namespace

void save(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  tensorio::writeBytes(out, "PVLC", 4);
  tensorio::writeU16(out, kVersion);
  tensorio::writeU32(out, static_cast<uint32_t>(ckpt.configJson.size()));
  tensorio::writeBytes(out, ckpt.configJson.data(), ckpt.configJson.size());

  tensorio::writeSection(out, packParams(ckpt.parameters));

  std::vector<NamedTensor> opt = packParams(ckpt.momentum);
  NamedTensor epoch;
  epoch.name = "epoch";
  epoch.dims = {1};
  epoch.data = {static_cast<float>(ckpt.epoch)};
  opt.push_back(std::move(epoch));
  tensorio::writeSection(out, opt);

  NamedTensor rng;
  rng.name = "rng.state";
  rng.dims = {static_cast<uint32_t>(ckpt.rngState.size())};
  rng.data.reserve(ckpt.rngState.size());
  for (char c : ckpt.rngState) {
    rng.data.push_back(static_cast<float>(static_cast<unsigned char>(c)));
  }
  tensorio::writeSection(out, {rng});

  if (!out) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  tensorio::readBytes(in, magic, 4);
  if (std::memcmp(magic, "PVLC", 4) != 0) {
    throw DataError("not a checkpoint (bad magic): " + path);
  }
  if (tensorio::readU16(in) != kVersion) {
    throw DataError("unsupported checkpoint version: " + path);
  }

  Checkpoint ckpt;
  const uint32_t configLen = tensorio::readU32(in);
  ckpt.configJson.resize(configLen);
  if (configLen) tensorio::readBytes(in, ckpt.configJson.data(), configLen);

  ckpt.parameters = unpackParams(tensorio::readSection(in));

  auto opt = tensorio::readSection(in);
  for (auto& t : opt) {
    if (t.name == "epoch") {
      if (t.data.size() != 1) throw DataError("malformed epoch record");
      ckpt.epoch = static_cast<int>(t.data[0]);
    } else {
      ckpt.momentum.add(t.name, tensorio::toMatrix(t));
    }
  }

  auto rngSection = tensorio::readSection(in);
  if (rngSection.size() != 1 || rngSection[0].name != "rng.state") {
    throw DataError("malformed RNG section in checkpoint");
  }
  ckpt.rngState.reserve(rngSection[0].data.size());
  for (float v : rngSection[0].data) {
    ckpt.rngState.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  }
  return ckpt;
}

}  // namespace pestvl::checkpoint
