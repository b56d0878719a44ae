#include "pestvl/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pestvl::partition {

namespace {

void requireWindowable(Index rows, Index cols, Index g) {
  if (g < 1) throw std::invalid_argument("partition: granularity must be >= 1");
  if (rows < g || cols < g || rows % g != 0 || cols % g != 0) {
    throw std::invalid_argument("partition: granularity must divide the grid");
  }
}

}  // namespace

std::vector<Index> windowPermutation(Index rows, Index cols, Index g) {
  requireWindowable(rows, cols, g);
  const Index wr = rows / g;
  const Index wc = cols / g;
  std::vector<Index> perm;
  perm.reserve(static_cast<size_t>(rows * cols));
  for (Index qr = 0; qr < g; ++qr) {
    for (Index qc = 0; qc < g; ++qc) {
      for (Index r = 0; r < wr; ++r) {
        for (Index c = 0; c < wc; ++c) {
          perm.push_back((qr * wr + r) * cols + (qc * wc + c));
        }
      }
    }
  }
  return perm;
}

std::vector<Index> nestedPermutation(Index rows, Index cols, Index gCoarse,
                                     Index gFine) {
  requireWindowable(rows, cols, gCoarse);
  requireWindowable(rows, cols, gFine);
  if (gFine % gCoarse != 0) {
    throw std::invalid_argument("partition: fine granularity must nest in coarse");
  }
  const Index sub = gFine / gCoarse;  // sub-windows per quadrant edge
  const Index qr0 = rows / gCoarse;
  const Index qc0 = cols / gCoarse;
  const Index fr = rows / gFine;
  const Index fc = cols / gFine;
  std::vector<Index> perm;
  perm.reserve(static_cast<size_t>(rows * cols));
  for (Index qr = 0; qr < gCoarse; ++qr) {
    for (Index qc = 0; qc < gCoarse; ++qc) {
      for (Index sr = 0; sr < sub; ++sr) {
        for (Index sc = 0; sc < sub; ++sc) {
          const Index baseR = qr * qr0 + sr * fr;
          const Index baseC = qc * qc0 + sc * fc;
          for (Index r = 0; r < fr; ++r) {
            for (Index c = 0; c < fc; ++c) {
              perm.push_back((baseR + r) * cols + (baseC + c));
            }
          }
        }
      }
    }
  }
  return perm;
}

std::vector<Index> inversePermutation(const std::vector<Index>& perm) {
  std::vector<Index> inv(perm.size(), -1);
  for (size_t s = 0; s < perm.size(); ++s) {
    const Index t = perm[s];
    if (t < 0 || t >= static_cast<Index>(perm.size()) || inv[static_cast<size_t>(t)] != -1) {
      throw std::invalid_argument("inversePermutation: input is not a permutation");
    }
    inv[static_cast<size_t>(t)] = static_cast<Index>(s);
  }
  return inv;
}

PartitionPlan makePlan(Index rows, Index cols) {
  PartitionPlan plan;
  plan.rows = rows;
  plan.cols = cols;
  plan.coarseG = 2;
  plan.fineG = (rows % 4 == 0 && cols % 4 == 0) ? 4 : 2;
  plan.coarsePerm = windowPermutation(rows, cols, plan.coarseG);
  plan.finePerm = plan.fineG == plan.coarseG
                      ? plan.coarsePerm
                      : nestedPermutation(rows, cols, plan.coarseG, plan.fineG);
  return plan;
}

Vectord quadrantEnergy(const Matrixd& saliency, Index g) {
  requireWindowable(saliency.rows(), saliency.cols(), g);
  const Index wr = saliency.rows() / g;
  const Index wc = saliency.cols() / g;
  Vectord energy(g * g);
  for (Index qr = 0; qr < g; ++qr) {
    for (Index qc = 0; qc < g; ++qc) {
      energy(qr * g + qc) = saliency.block(qr * wr, qc * wc, wr, wc).sum();
    }
  }
  return energy;
}

std::vector<Index> topkSelect(const Vectord& scores, Index k) {
  if (k < 1 || k > scores.size()) {
    throw std::invalid_argument("topkSelect: k out of range");
  }
  std::vector<Index> idx(static_cast<size_t>(scores.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  idx.resize(static_cast<size_t>(k));
  return idx;
}

Index argmaxIndex(const Vectord& scores) { return topkSelect(scores, 1).front(); }

Vectord gumbelSoftmax(const Vectord& scores, const Vectord& noise, double tau) {
  if (scores.size() != noise.size()) {
    throw std::invalid_argument("gumbelSoftmax: score/noise size mismatch");
  }
  if (!(tau > 0.0)) throw std::invalid_argument("gumbelSoftmax: tau must be positive");
  Vectord z = (scores + noise) / tau;
  const double zmax = z.maxCoeff();
  Vectord e = (z.array() - zmax).exp();
  return e / e.sum();
}

Vectord slotBroadcast(const Vectord& quadrantWeights, Index tokenCount) {
  const Index q = quadrantWeights.size();
  if (q < 1 || tokenCount % q != 0) {
    throw std::invalid_argument("slotBroadcast: quadrant count must divide tokens");
  }
  const Index span = tokenCount / q;
  Vectord out(tokenCount);
  for (Index i = 0; i < q; ++i) {
    out.segment(i * span, span).setConstant(quadrantWeights(i));
  }
  return out;
}

std::vector<Segment> segmentsForSelection(const PartitionPlan& plan,
                                          const std::vector<bool>& selected) {
  if (static_cast<Index>(selected.size()) != plan.quadrantCount()) {
    throw std::invalid_argument("segmentsForSelection: selection size mismatch");
  }
  const Index span = plan.slotsPerQuadrant();
  const Index subCount =
      (plan.fineG / plan.coarseG) * (plan.fineG / plan.coarseG);
  std::vector<Segment> segs;
  for (Index q = 0; q < plan.quadrantCount(); ++q) {
    const Index base = q * span;
    if (selected[static_cast<size_t>(q)] && subCount > 1) {
      const Index fineLen = span / subCount;
      for (Index s = 0; s < subCount; ++s) {
        segs.push_back({base + s * fineLen, fineLen});
      }
    } else {
      segs.push_back({base, span});
    }
  }
  return segs;
}

std::vector<Index> blendedPermutation(const PartitionPlan& plan,
                                      const std::vector<bool>& selected) {
  if (static_cast<Index>(selected.size()) != plan.quadrantCount()) {
    throw std::invalid_argument("blendedPermutation: selection size mismatch");
  }
  const Index span = plan.slotsPerQuadrant();
  std::vector<Index> perm(static_cast<size_t>(plan.tokenCount()));
  for (Index q = 0; q < plan.quadrantCount(); ++q) {
    const auto& src = selected[static_cast<size_t>(q)] ? plan.finePerm : plan.coarsePerm;
    for (Index s = q * span; s < (q + 1) * span; ++s) {
      perm[static_cast<size_t>(s)] = src[static_cast<size_t>(s)];
    }
  }
  return perm;
}

}  // namespace pestvl::partition
