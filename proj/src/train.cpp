#include "pestvl/train.hpp"

#include "pestvl/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace pestvl::train {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string csvHeader() { return "epoch,split,accuracy,precision,f1,gm,loss"; }

std::string csvRow(const MetricsRow& row) {
  return std::to_string(row.epoch) + "," + row.split + "," + num(row.accuracy) +
         "," + num(row.precision) + "," + num(row.f1) + "," + num(row.gm) +
         "," + num(row.loss);
}

void writeCsv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write metrics CSV: " + path);
  out << csvHeader() << '\n';
  for (const auto& row : rows) out << csvRow(row) << '\n';
}

Trainer::Trainer(config::ModelConfig cfg) : cfg_(std::move(cfg)) {
  config::validate(cfg_);
}

void Trainer::setData(std::vector<dataset::LoadedSample> train,
                      std::vector<dataset::LoadedSample> val,
                      std::vector<dataset::LoadedSample> test,
                      std::vector<dataset::LoadedSample> flippedTrain) {
  if (!flippedTrain.empty() && flippedTrain.size() != train.size()) {
    throw DataError("flipped variants must pair with the train split");
  }
  train_ = std::move(train);
  val_ = std::move(val);
  test_ = std::move(test);
  flipped_ = std::move(flippedTrain);
}

void Trainer::initialize() {
  gen_.seed(cfg_.optimizer.seed);
  params_ = model::initParams<float>(cfg_, gen_);
  momentum_ = params::ParamSet<float>();
  for (const auto& e : params_) {
    momentum_.add(e.name, Matrixf::Zero(e.value.rows(), e.value.cols()));
  }
  epoch_ = 0;
}

void Trainer::restore(const checkpoint::Checkpoint& ckpt) {
  params_ = ckpt.parameters;
  momentum_ = ckpt.momentum;
  epoch_ = ckpt.epoch;
  std::istringstream in(ckpt.rngState);
  in >> gen_;
  if (!in) throw DataError("checkpoint RNG state is corrupt");
  if (params_.size() != momentum_.size()) {
    throw DataError("checkpoint parameter/momentum mismatch");
  }
}

checkpoint::Checkpoint Trainer::snapshot() const {
  checkpoint::Checkpoint ckpt;
  ckpt.configJson = config::toJson(cfg_);
  ckpt.parameters = params_;
  ckpt.momentum = momentum_;
  ckpt.epoch = epoch_;
  std::ostringstream out;
  out << gen_;
  ckpt.rngState = out.str();
  return ckpt;
}

double Trainer::learningRate(int epoch) const {
  const auto& opt = cfg_.optimizer;
  if (opt.schedule == "cosine") {
    const double t = double(epoch) / double(std::max(1, opt.epochs));
    return opt.lr * 0.5 * (1.0 + std::cos(M_PI * t));
  }
  return opt.lr;
}

double Trainer::trainEpoch(int epochIndex) {
  const auto& opt = cfg_.optimizer;
  const double lr = learningRate(epochIndex);

  std::vector<int> order(train_.size());
  std::iota(order.begin(), order.end(), 0);
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[gen_() % i]);
  }
  std::vector<char> useFlip(train_.size(), 0);
  if (opt.augmentFlip) {
    if (flipped_.empty()) {
      throw ConfigError("augmentFlip is on but no flipped variants were loaded");
    }
    for (auto& f : useFlip) f = char(gen_() & 1);
  }

  double lossSum = 0.0;
  int batches = 0;
  for (size_t begin = 0; begin < order.size(); begin += size_t(opt.batchSize)) {
    const size_t end = std::min(order.size(), begin + size_t(opt.batchSize));
    std::vector<model::SampleView<float>> views;
    views.reserve(end - begin);
    for (size_t i = begin; i < end; ++i) {
      const auto& s = useFlip[size_t(order[i])]
                          ? flipped_[size_t(order[i])]
                          : train_[size_t(order[i])];
      views.push_back({&s.image, &s.saliency, &s.caption, s.label});
    }

    graph::Graph<float> G;
    model::ModelGraph<float> M(G, cfg_, params_);
    graph::Node loss = M.batchLoss(views, &gen_);
    const double lossVal = double(G.value(loss)(0, 0));
    if (!std::isfinite(lossVal)) {
      throw std::runtime_error("training diverged at epoch " +
                               std::to_string(epochIndex + 1) + " batch " +
                               std::to_string(batches + 1));
    }
    G.backward(loss);

    for (const auto& [name, node] : M.boundParams()) {
      if (!cfg_.learnDecay && name.size() > 6 &&
          name.compare(name.size() - 6, 6, ".decay") == 0) {
        continue;
      }
      const Matrixf& grad = G.gradOf(node);
      Matrixf& theta = params_.get(name);
      Matrixf& vel = momentum_.get(name);
      if (opt.weightDecay > 0) {
        vel = float(opt.momentum) * vel + grad + float(opt.weightDecay) * theta;
      } else {
        vel = float(opt.momentum) * vel + grad;
      }
      theta -= float(lr) * vel;
    }
    lossSum += lossVal;
    ++batches;
  }
  return batches ? lossSum / batches : 0.0;
}

EvalResult Trainer::evaluate(const std::vector<dataset::LoadedSample>& data) {
  if (data.empty()) throw DataError("evaluate: empty split");
  std::vector<int> labels, preds;
  labels.reserve(data.size());
  preds.reserve(data.size());
  double lossSum = 0.0;
  for (const auto& s : data) {
    graph::Graph<float> G;
    model::ModelGraph<float> M(G, cfg_, params_);
    std::vector<model::SampleView<float>> view = {
        {&s.image, &s.saliency, &s.caption, s.label}};
    graph::Node logits = M.batchLogits(view, nullptr);
    graph::Node loss = G.crossEntropyLoss(logits, {s.label});
    lossSum += double(G.value(loss)(0, 0));
    Index best = 0;
    G.value(logits).row(0).maxCoeff(&best);
    labels.push_back(s.label);
    preds.push_back(int(best));
  }
  EvalResult out;
  out.report = metrics::summarize(
      metrics::confusion(labels, preds, cfg_.classCount));
  out.loss = lossSum / double(data.size());
  return out;
}

TrainResult Trainer::run(const std::string& csvPath,
                         const std::string& ckptPath) {
  if (train_.empty()) throw DataError("run: no training data loaded");
  const auto& opt = cfg_.optimizer;
  TrainResult result;

  auto logSplit = [&](int epoch1, const std::string& split,
                      const std::vector<dataset::LoadedSample>& data) {
    const EvalResult ev = evaluate(data);
    MetricsRow row;
    row.epoch = epoch1;
    row.split = split;
    row.accuracy = ev.report.accuracy;
    row.precision = cfg_.weightedPrecision ? ev.report.weightedPrecision
                                           : ev.report.macroPrecision;
    row.f1 = ev.report.macroF1;
    row.gm = ev.report.geometricMean;
    row.loss = ev.loss;
    result.log.push_back(row);
    if (onRow) onRow(row);
    return row;
  };

  while (epoch_ < opt.epochs) {
    trainEpoch(epoch_);
    ++epoch_;

    const MetricsRow trainRow = logSplit(epoch_, "train", train_);
    if (!val_.empty()) logSplit(epoch_, "val", val_);
    if (!test_.empty()) logSplit(epoch_, "test", test_);

    result.epochsRun = epoch_;
    result.finalTrainLoss = trainRow.loss;
    result.finalTrainAccuracy = trainRow.accuracy;

    if (!ckptPath.empty() && opt.checkpointEvery > 0 &&
        epoch_ % opt.checkpointEvery == 0) {
      checkpoint::save(ckptPath, snapshot());
    }
    if (opt.stopAtTrainAccuracy > 0 &&
        trainRow.accuracy >= opt.stopAtTrainAccuracy) {
      result.stoppedEarly = true;
      break;
    }
  }

  if (!csvPath.empty()) writeCsv(csvPath, result.log);
  if (!ckptPath.empty()) checkpoint::save(ckptPath, snapshot());
  return result;
}

}  // namespace pestvl::train
