#pragma once

// Backbone block assembly on the autograd tape: spatial mix (token shift,
// R/K/V projections, distance-decayed WKV over saliency-chosen window
// segments, gated output) followed by channel mix. With all projections at
// zero both mixes collapse to the identity, so freshly initialized stacks
// start as a pass-through.

#include "pestvl/graph.hpp"
#include "pestvl/partition.hpp"
#include "pestvl/wkv.hpp"

namespace pestvl::rwkv {

using graph::Graph;
using graph::Node;

struct LayerNormNodes {
  Node gamma, beta;  // 1 x C
};

struct ShiftNodes {
  Node kernel;  // 9 x C depthwise taps
  Node alpha;   // 1 x C mix-in gain for the shifted signal
  Node beta;    // 1 x C gain for the unshifted signal
};

struct SpatialMixNodes {
  LayerNormNodes ln;
  ShiftNodes shift;
  Node wr, wk, wv, wo;  // C x C, no bias
  Node decay, bonus;    // 1 x C
};

struct ChannelMixNodes {
  LayerNormNodes ln;
  ShiftNodes shift;
  Node wr;  // C x C
  Node wk;  // C x H
  Node wv;  // H x C
  Node wo;  // C x C
};

struct ConvBlockNodes {
  LayerNormNodes ln;
  Node weight;  // (9*C) x C
  Node bias;    // 1 x C
};

// How one sample's tokens reorder into scan slots for this block. When
// partitioned is false the sequence stays in row-major order and segments
// describe the whole image.
struct SequencePlan {
  bool partitioned = false;
  std::vector<Index> coarsePerm;       // slot -> token
  std::vector<Index> finePerm;         // slot -> token
  std::vector<Index> inverseBlended;   // token -> slot under the hard choice
  std::vector<partition::Segment> segments;
  Node maskSlots;  // T x 1 fine-layout weight per slot (partitioned only)
};

// x_s = alpha ⊙ depthwise3x3(x) + beta ⊙ x, zero padding at the border.
template <typename S>
Node tokenShift(Graph<S>& G, Node x, const ShiftNodes& p, Index rows,
                Index cols) {
  Node shifted = G.depthwiseConv3x3(x, p.kernel, rows, cols);
  return G.add(G.scaleChannels(shifted, p.alpha), G.scaleChannels(x, p.beta));
}

template <typename S>
Node spatialMix(Graph<S>& G, Node x, const SpatialMixNodes& p,
                const SequencePlan& plan, Index rows, Index cols) {
  Node ln = G.layerNorm(x, p.ln.gamma, p.ln.beta);
  Node xs = tokenShift(G, ln, p.shift, rows, cols);
  Node r = G.matmul(xs, p.wr);
  Node k = G.matmul(xs, p.wk);
  Node v = G.matmul(xs, p.wv);

  Node kSlots = k;
  Node vSlots = v;
  if (plan.partitioned) {
    kSlots = G.blendRows(G.gatherRows(k, plan.coarsePerm),
                         G.gatherRows(k, plan.finePerm), plan.maskSlots);
    vSlots = G.blendRows(G.gatherRows(v, plan.coarsePerm),
                         G.gatherRows(v, plan.finePerm), plan.maskSlots);
  }

  Node mixed = wkv::gaWkv(G, kSlots, vSlots, p.decay, p.bonus, plan.segments);
  if (plan.partitioned) mixed = G.gatherRows(mixed, plan.inverseBlended);

  Node gated = G.hadamard(G.sigmoid(r), mixed);
  return G.add(G.matmul(gated, p.wo), x);
}

// blockInput is the block's own input (the residual stream the shifted
// activation is added onto before the channel projections).
template <typename S>
Node channelMix(Graph<S>& G, Node x, Node blockInput, const ChannelMixNodes& p,
                Index rows, Index cols) {
  Node ln = G.layerNorm(x, p.ln.gamma, p.ln.beta);
  Node xc = G.add(tokenShift(G, ln, p.shift, rows, cols), blockInput);
  Node r = G.matmul(xc, p.wr);
  Node k = G.matmul(xc, p.wk);
  Node v = G.matmul(G.sqrelu(k), p.wv);
  Node gated = G.hadamard(G.sigmoid(r), v);
  return G.add(G.matmul(gated, p.wo), x);
}

template <typename S>
Node rwkvBlock(Graph<S>& G, Node x, const SpatialMixNodes& sp,
               const ChannelMixNodes& ch, const SequencePlan& plan, Index rows,
               Index cols) {
  Node s = spatialMix(G, x, sp, plan, rows, cols);
  return channelMix(G, s, x, ch, rows, cols);
}

// Plain residual conv block used by the conv-only ablation backbone.
template <typename S>
Node convBlock(Graph<S>& G, Node x, const ConvBlockNodes& p, Index rows,
               Index cols) {
  Node h = G.gelu(G.layerNorm(x, p.ln.gamma, p.ln.beta));
  return G.add(G.conv2d3x3(h, p.weight, p.bias, rows, cols, 1, 1), x);
}

}  // namespace pestvl::rwkv
