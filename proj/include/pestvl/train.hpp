#pragma once

// Deterministic single-threaded training: momentum SGD over per-batch tape
// graphs, eval passes with zero partition noise, per-epoch metric rows, and
// byte-exact checkpoint/resume. One mt19937_64 drives initialization, epoch
// shuffles, flip coins, and Gumbel noise, so (seed, config, data) pins the
// whole trajectory.

#include "pestvl/checkpoint.hpp"
#include "pestvl/config.hpp"
#include "pestvl/dataset.hpp"
#include "pestvl/metrics.hpp"
#include "pestvl/model.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace pestvl::train {

struct MetricsRow {
  int epoch = 0;  // 1-based
  std::string split;
  double accuracy = 0, precision = 0, f1 = 0, gm = 0, loss = 0;
};

std::string csvHeader();
std::string csvRow(const MetricsRow& row);
void writeCsv(const std::string& path, const std::vector<MetricsRow>& rows);

struct EvalResult {
  metrics::Report report;
  double loss = 0;
};

struct TrainResult {
  std::vector<MetricsRow> log;
  int epochsRun = 0;  // absolute epoch count reached
  double finalTrainLoss = 0;
  double finalTrainAccuracy = 0;
  bool stoppedEarly = false;
};

class Trainer {
 public:
  explicit Trainer(config::ModelConfig cfg);

  // Flipped train variants are required only when augmentFlip is on; they
  // pair index-for-index with the train split.
  void setData(std::vector<dataset::LoadedSample> train,
               std::vector<dataset::LoadedSample> val,
               std::vector<dataset::LoadedSample> test,
               std::vector<dataset::LoadedSample> flippedTrain = {});

  void initialize();  // fresh parameters and RNG from the config seed
  void restore(const checkpoint::Checkpoint& ckpt);
  checkpoint::Checkpoint snapshot() const;

  // Trains from the current epoch up to optimizer.epochs. Empty paths skip
  // the corresponding artifact.
  TrainResult run(const std::string& csvPath, const std::string& ckptPath);

  EvalResult evaluate(const std::vector<dataset::LoadedSample>& data);

  const config::ModelConfig& config() const { return cfg_; }
  const params::ParamSet<float>& parameters() const { return params_; }
  int epoch() const { return epoch_; }

  double learningRate(int epoch) const;  // schedule value for a 0-based epoch

  // Observes every metric row as it is produced (progress reporting).
  std::function<void(const MetricsRow&)> onRow;

 private:
  double trainEpoch(int epochIndex);  // mean batch loss

  config::ModelConfig cfg_;
  std::vector<dataset::LoadedSample> train_, val_, test_, flipped_;
  params::ParamSet<float> params_, momentum_;
  std::mt19937_64 gen_;
  int epoch_ = 0;
};

}  // namespace pestvl::train
