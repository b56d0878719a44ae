#pragma once

// Vision-language fusion block: refine the visual tokens and the text
// sequence (caption embedding plus learnable prompt rows), cross-attend with
// visual queries against text keys/values, then run a feed-forward refinement
// with a residual. The attended map is a row-stochastic mix of text value
// rows, so each output token stays inside their convex hull before the FFN.

#include "pestvl/graph.hpp"
#include "pestvl/rwkv.hpp"

#include <cmath>

namespace pestvl::fusion {

using graph::Graph;
using graph::Node;
using rwkv::LayerNormNodes;

struct FusionNodes {
  LayerNormNodes visLn;
  Node visW;  // C x C visual refine
  LayerNormNodes textLn;
  Node textW;   // D x D text refine (over caption + prompt rows)
  Node prompt;  // P x D learnable prompt, skipped when invalid
  Node wqv;     // C x d_a visual query projection
  Node wkt;     // D x d_a text key projection
  Node wvt;     // D x C text value projection
  LayerNormNodes ffnLn;
  Node w1, b1;  // C x 4C, 1 x 4C
  Node w2, b2;  // 4C x C, 1 x C
};

// f: T x C visual tokens; text: 1 x D caption embedding (rows may be >1 if a
// caller supplies a longer text sequence).
template <typename S>
Node fusionBlock(Graph<S>& G, Node f, Node text, const FusionNodes& p) {
  Node fTilde =
      G.add(G.matmul(G.layerNorm(f, p.visLn.gamma, p.visLn.beta), p.visW), f);

  Node seq = p.prompt.valid() ? G.concatRows(text, p.prompt) : text;
  Node tTilde = G.add(
      G.matmul(G.layerNorm(seq, p.textLn.gamma, p.textLn.beta), p.textW), seq);

  Node q = G.matmul(fTilde, p.wqv);
  Node k = G.matmul(tTilde, p.wkt);
  Node v = G.matmul(tTilde, p.wvt);
  const S invSqrtD = S(1) / std::sqrt(S(G.value(q).cols()));
  Node weights = G.softmaxRows(G.scale(G.matmulNT(q, k), invSqrtD));
  Node fhat = G.matmul(weights, v);

  Node h = G.gelu(G.addRowBroadcast(
      G.matmul(G.layerNorm(fhat, p.ffnLn.gamma, p.ffnLn.beta), p.w1), p.b1));
  return G.add(G.addRowBroadcast(G.matmul(h, p.w2), p.b2), fhat);
}

}  // namespace pestvl::fusion
