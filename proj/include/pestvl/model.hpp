#pragma once

// Whole-model assembly: a stride-4 conv stem, a stack of WKV mixing blocks
// whose scan order follows saliency-selected window refinement, optional
// vision-language fusion blocks, and a mean-pooled linear head. Parameters
// live in a named ParamSet; ModelGraph binds them as tape inputs so one
// backward pass yields every gradient by name.
//
// Initialization keeps the network an exact identity above the stem (output
// projections and refine linears start at zero), which holds early training
// stable at large learning rates while gradients wake each branch.

#include "pestvl/config.hpp"
#include "pestvl/fusion.hpp"
#include "pestvl/params.hpp"
#include "pestvl/rng.hpp"
#include "pestvl/rwkv.hpp"

#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pestvl::model {

using graph::Graph;
using graph::Node;

template <typename S = float>
params::ParamSet<S> initParams(const config::ModelConfig& cfg,
                               std::mt19937_64& gen) {
  params::ParamSet<S> ps;
  const Index C = cfg.stemChannels;
  const Index H = cfg.hiddenChannels();
  const Index D = cfg.embeddingDim;
  const Index A = cfg.attentionDim;

  auto gauss = [&](Index r, Index c, double sd) {
    MatrixX<S> m(r, c);
    for (Index i = 0; i < r; ++i) {
      for (Index j = 0; j < c; ++j) m(i, j) = S(gaussian(gen) * sd);
    }
    return m;
  };
  auto zeros = [](Index r, Index c) { return MatrixX<S>::Zero(r, c).eval(); };
  auto ones = [](Index r, Index c) { return MatrixX<S>::Ones(r, c).eval(); };
  auto addLn = [&](const std::string& pre, Index width) {
    ps.add(pre + ".gamma", ones(1, width));
    ps.add(pre + ".beta", zeros(1, width));
  };
  auto addShift = [&](const std::string& pre) {
    ps.add(pre + ".kernel", gauss(9, C, 1.0 / 3.0));
    ps.add(pre + ".alpha", zeros(1, C));
    ps.add(pre + ".beta", ones(1, C));
  };

  ps.add("stem.conv1.weight", gauss(9 * 3, C, 1.0 / std::sqrt(27.0)));
  ps.add("stem.conv1.bias", zeros(1, C));
  addLn("stem.ln1", C);
  ps.add("stem.conv2.weight", gauss(9 * C, C, 1.0 / std::sqrt(9.0 * C)));
  ps.add("stem.conv2.bias", zeros(1, C));
  addLn("stem.ln2", C);

  const double invSqrtC = 1.0 / std::sqrt(double(C));
  for (int b = 0; b < cfg.stageCount; ++b) {
    const std::string pre = "block" + std::to_string(b);
    if (cfg.ablation.convOnlyBackbone) {
      addLn(pre + ".conv.ln", C);
      ps.add(pre + ".conv.weight", zeros(9 * C, C));
      ps.add(pre + ".conv.bias", zeros(1, C));
      continue;
    }
    addLn(pre + ".spatial.ln", C);
    addShift(pre + ".spatial.shift");
    ps.add(pre + ".spatial.wr", gauss(C, C, invSqrtC));
    ps.add(pre + ".spatial.wk", gauss(C, C, invSqrtC));
    ps.add(pre + ".spatial.wv", gauss(C, C, invSqrtC));
    ps.add(pre + ".spatial.wo", zeros(C, C));
    ps.add(pre + ".spatial.decay",
           RowVectorX<S>::LinSpaced(C, S(1), S(5)).eval());
    ps.add(pre + ".spatial.bonus", (ones(1, C) * S(0.5)).eval());
    addLn(pre + ".channel.ln", C);
    addShift(pre + ".channel.shift");
    ps.add(pre + ".channel.wr", gauss(C, C, invSqrtC));
    ps.add(pre + ".channel.wk", gauss(C, H, invSqrtC));
    ps.add(pre + ".channel.wv", gauss(H, C, 1.0 / std::sqrt(double(H))));
    ps.add(pre + ".channel.wo", zeros(C, C));
  }

  if (!cfg.ablation.disableFusion) {
    const double invSqrtD = 1.0 / std::sqrt(double(D));
    for (int j = 0; j < cfg.fusionCount; ++j) {
      const std::string pre = "fusion" + std::to_string(j);
      addLn(pre + ".vis.ln", C);
      ps.add(pre + ".vis.w", zeros(C, C));
      addLn(pre + ".text.ln", D);
      ps.add(pre + ".text.w", zeros(D, D));
      if (cfg.promptCount() > 0) {
        // Rows land near unit norm, like the caption embeddings they join.
        ps.add(pre + ".prompt", gauss(cfg.promptCount(), D, invSqrtD));
      }
      ps.add(pre + ".attn.wqv", gauss(C, A, invSqrtC));
      ps.add(pre + ".attn.wkt", gauss(D, A, invSqrtD));
      ps.add(pre + ".attn.wvt", gauss(D, C, invSqrtD));
      addLn(pre + ".ffn.ln", C);
      ps.add(pre + ".ffn.w1", gauss(C, 4 * C, invSqrtC));
      ps.add(pre + ".ffn.b1", zeros(1, 4 * C));
      ps.add(pre + ".ffn.w2", zeros(4 * C, C));
      ps.add(pre + ".ffn.b2", zeros(1, C));
    }
  }

  ps.add("head.weight", gauss(C, cfg.classCount, invSqrtC));
  ps.add("head.bias", zeros(1, cfg.classCount));
  return ps;
}

template <typename S>
struct SampleView {
  const MatrixX<S>* image = nullptr;    // (imageSize^2) x 3 tokens, row-major
  const Matrixd* saliency = nullptr;    // featureSide x featureSide grid
  const MatrixX<S>* caption = nullptr;  // 1 x D embedding
  int label = 0;
};

template <typename S>
class ModelGraph {
 public:
  using Taps = std::vector<std::pair<std::string, Node>>;

  ModelGraph(Graph<S>& G, const config::ModelConfig& cfg,
             const params::ParamSet<S>& ps)
      : G_(G), cfg_(cfg), plan_(partition::makePlan(cfg.featureSide(),
                                                    cfg.featureSide())) {
    bound_.reserve(ps.size());
    for (const auto& e : ps) {
      Node n = G_.input(e.value);
      bound_.emplace_back(e.name, n);
      byName_.emplace(e.name, n);
    }
    slotQuadrant_.resize(static_cast<size_t>(plan_.tokenCount()));
    for (Index t = 0; t < plan_.tokenCount(); ++t) {
      slotQuadrant_[static_cast<size_t>(t)] = t / plan_.slotsPerQuadrant();
    }
  }

  const std::vector<std::pair<std::string, Node>>& boundParams() const {
    return bound_;
  }
  Node param(const std::string& name) const { return byName_.at(name); }

  // rng drives the per-block Gumbel perturbations; nullptr means evaluation
  // (zero noise, hard argmax selection, no RNG consumed).
  Node forward(const MatrixX<S>& image, const Matrixd& saliencyGrid,
               const MatrixX<S>& caption, std::mt19937_64* rng,
               Taps* taps = nullptr) {
    const Index side = cfg_.featureSide();
    if (image.rows() != Index(cfg_.imageSize) * cfg_.imageSize ||
        image.cols() != 3) {
      throw std::invalid_argument("forward: image tokens must be (S^2) x 3");
    }

    Node x = G_.input(image);
    Node h = G_.conv2d3x3(x, param("stem.conv1.weight"),
                          param("stem.conv1.bias"), cfg_.imageSize,
                          cfg_.imageSize, 2, 1);
    h = G_.gelu(G_.layerNorm(h, param("stem.ln1.gamma"), param("stem.ln1.beta")));
    h = G_.conv2d3x3(h, param("stem.conv2.weight"), param("stem.conv2.bias"),
                     cfg_.imageSize / 2, cfg_.imageSize / 2, 2, 1);
    Node f =
        G_.gelu(G_.layerNorm(h, param("stem.ln2.gamma"), param("stem.ln2.beta")));
    tap(taps, "stem", f);

    const bool partitioned = !cfg_.ablation.disablePartition;
    Node scores;
    if (!cfg_.ablation.convOnlyBackbone && partitioned) {
      if (saliencyGrid.rows() != side || saliencyGrid.cols() != side) {
        throw std::invalid_argument("forward: saliency grid must match the "
                                    "feature side");
      }
      Vectord e = partition::quadrantEnergy(saliencyGrid, plan_.coarseG);
      scores = G_.input(e.template cast<S>());
    }

    for (int b = 0; b < cfg_.stageCount; ++b) {
      const std::string pre = "block" + std::to_string(b);
      if (cfg_.ablation.convOnlyBackbone) {
        rwkv::ConvBlockNodes cb{{param(pre + ".conv.ln.gamma"),
                                 param(pre + ".conv.ln.beta")},
                                param(pre + ".conv.weight"),
                                param(pre + ".conv.bias")};
        f = rwkv::convBlock(G_, f, cb, side, side);
      } else {
        rwkv::SequencePlan sp = sequencePlan(scores, partitioned, rng);
        f = rwkv::rwkvBlock(G_, f, spatialNodes(pre), channelNodes(pre), sp,
                            side, side);
      }
      tap(taps, pre, f);
    }

    if (!cfg_.ablation.disableFusion) {
      if (caption.rows() != 1 || caption.cols() != cfg_.embeddingDim) {
        throw std::invalid_argument("forward: caption embedding must be 1 x D");
      }
      Node text = G_.input(caption);
      for (int j = 0; j < cfg_.fusionCount; ++j) {
        const std::string pre = "fusion" + std::to_string(j);
        f = fusion::fusionBlock(G_, f, text, fusionNodes(pre));
        tap(taps, pre, f);
      }
    }

    Node pooled = G_.meanRows(f);
    tap(taps, "pooled", pooled);
    return G_.addRowBroadcast(G_.matmul(pooled, param("head.weight")),
                              param("head.bias"));
  }

  Node batchLogits(const std::vector<SampleView<S>>& batch,
                   std::mt19937_64* rng) {
    if (batch.empty()) throw std::invalid_argument("batchLogits: empty batch");
    Node logits;
    for (const auto& s : batch) {
      Node l = forward(*s.image, *s.saliency, *s.caption, rng);
      logits = logits.valid() ? G_.concatRows(logits, l) : l;
    }
    return logits;
  }

  Node batchLoss(const std::vector<SampleView<S>>& batch,
                 std::mt19937_64* rng) {
    std::vector<int> labels;
    labels.reserve(batch.size());
    for (const auto& s : batch) labels.push_back(s.label);
    return G_.crossEntropyLoss(batchLogits(batch, rng), std::move(labels));
  }

  const partition::PartitionPlan& plan() const { return plan_; }

 private:
  void tap(Taps* taps, const std::string& name, Node n) const {
    if (taps) taps->emplace_back(name, n);
  }

  rwkv::SequencePlan sequencePlan(Node scores, bool partitioned,
                                  std::mt19937_64* rng) {
    rwkv::SequencePlan sp;
    if (!partitioned) {
      sp.partitioned = false;
      sp.segments = {partition::Segment{0, plan_.tokenCount()}};
      return sp;
    }
    const Index Q = plan_.quadrantCount();
    VectorX<S> noise = VectorX<S>::Zero(Q);
    if (rng) {
      for (Index q = 0; q < Q; ++q) noise(q) = S(gumbel(*rng));
    }
    // The structural choice (segments, scatter) must agree with the mask the
    // tape emits, so both read the same perturbed scores.
    Vectord perturbed =
        (G_.value(scores).col(0) + noise).template cast<double>();
    std::vector<Index> top = partition::topkSelect(perturbed, cfg_.topK);
    std::vector<bool> selected(static_cast<size_t>(Q), false);
    for (Index q : top) selected[static_cast<size_t>(q)] = true;

    const bool hard = rng ? cfg_.hardMask : true;
    Node mask = G_.gumbelMask(scores, noise, S(cfg_.gumbelTau), hard,
                              Index(cfg_.topK));
    sp.partitioned = true;
    sp.maskSlots = G_.gatherRows(mask, slotQuadrant_);
    sp.coarsePerm = plan_.coarsePerm;
    sp.finePerm = plan_.finePerm;
    sp.inverseBlended = partition::inversePermutation(
        partition::blendedPermutation(plan_, selected));
    sp.segments = partition::segmentsForSelection(plan_, selected);
    return sp;
  }

  rwkv::SpatialMixNodes spatialNodes(const std::string& pre) const {
    return {{param(pre + ".spatial.ln.gamma"), param(pre + ".spatial.ln.beta")},
            {param(pre + ".spatial.shift.kernel"),
             param(pre + ".spatial.shift.alpha"),
             param(pre + ".spatial.shift.beta")},
            param(pre + ".spatial.wr"),
            param(pre + ".spatial.wk"),
            param(pre + ".spatial.wv"),
            param(pre + ".spatial.wo"),
            param(pre + ".spatial.decay"),
            param(pre + ".spatial.bonus")};
  }

  rwkv::ChannelMixNodes channelNodes(const std::string& pre) const {
    return {{param(pre + ".channel.ln.gamma"), param(pre + ".channel.ln.beta")},
            {param(pre + ".channel.shift.kernel"),
             param(pre + ".channel.shift.alpha"),
             param(pre + ".channel.shift.beta")},
            param(pre + ".channel.wr"),
            param(pre + ".channel.wk"),
            param(pre + ".channel.wv"),
            param(pre + ".channel.wo")};
  }

  fusion::FusionNodes fusionNodes(const std::string& pre) const {
    fusion::FusionNodes fn;
    fn.visLn = {param(pre + ".vis.ln.gamma"), param(pre + ".vis.ln.beta")};
    fn.visW = param(pre + ".vis.w");
    fn.textLn = {param(pre + ".text.ln.gamma"), param(pre + ".text.ln.beta")};
    fn.textW = param(pre + ".text.w");
    if (byName_.count(pre + ".prompt")) fn.prompt = param(pre + ".prompt");
    fn.wqv = param(pre + ".attn.wqv");
    fn.wkt = param(pre + ".attn.wkt");
    fn.wvt = param(pre + ".attn.wvt");
    fn.ffnLn = {param(pre + ".ffn.ln.gamma"), param(pre + ".ffn.ln.beta")};
    fn.w1 = param(pre + ".ffn.w1");
    fn.b1 = param(pre + ".ffn.b1");
    fn.w2 = param(pre + ".ffn.w2");
    fn.b2 = param(pre + ".ffn.b2");
    return fn;
  }

  Graph<S>& G_;
  config::ModelConfig cfg_;
  partition::PartitionPlan plan_;
  std::vector<std::pair<std::string, Node>> bound_;
  std::unordered_map<std::string, Node> byName_;
  std::vector<Index> slotQuadrant_;
};

}  // namespace pestvl::model
