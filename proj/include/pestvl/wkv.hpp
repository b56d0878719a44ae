#pragma once

// Distance-decayed WKV attention over window segments. For tokens t, i inside
// one segment of length T and per-channel decay w and bonus u:
//
//   wkv_t = [ sum_{i != t} e^{-(|t-i|-1)/T * w + k_i} v_i + e^{u + k_t} v_t ]
//         / [ sum_{i != t} e^{-(|t-i|-1)/T * w + k_i}     + e^{u + k_t}     ]
//
// The forward pass is an O(T) bidirectional scan with a running-max exponent
// per direction; the backward pass materializes the row-stabilized softmax
// weights in O(T^2) per channel.

#include "pestvl/graph.hpp"
#include "pestvl/partition.hpp"
#include "pestvl/types.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace pestvl::wkv {

using partition::Segment;

namespace detail {

template <typename S>
void requireInputs(const MatrixX<S>& k, const MatrixX<S>& v,
                   const RowVectorX<S>& w, const RowVectorX<S>& u,
                   const std::vector<Segment>& segments) {
  if (k.rows() != v.rows() || k.cols() != v.cols()) {
    throw std::invalid_argument("gaWkv: k and v shapes disagree");
  }
  if (w.size() != k.cols() || u.size() != k.cols()) {
    throw std::invalid_argument("gaWkv: w and u must have one entry per channel");
  }
  Index cursor = 0;
  for (const auto& seg : segments) {
    if (seg.begin != cursor || seg.length < 1) {
      throw std::invalid_argument("gaWkv: segments must tile the sequence");
    }
    cursor += seg.length;
  }
  if (cursor != k.rows()) {
    throw std::invalid_argument("gaWkv: segments must cover every token");
  }
}

}  // namespace detail

template <typename S>
MatrixX<S> gaWkvForward(const MatrixX<S>& k, const MatrixX<S>& v,
                        const RowVectorX<S>& w, const RowVectorX<S>& u,
                        const std::vector<Segment>& segments) {
  detail::requireInputs(k, v, w, u, segments);
  const Index C = k.cols();
  const S negInf = -std::numeric_limits<S>::infinity();
  MatrixX<S> out(k.rows(), C);

  std::vector<S> pL, aL, bL, pR, aR, bR;
  for (const auto& seg : segments) {
    const Index T = seg.length;
    pL.assign(static_cast<size_t>(T), negInf);
    aL.assign(static_cast<size_t>(T), S(0));
    bL.assign(static_cast<size_t>(T), S(0));
    pR.assign(static_cast<size_t>(T), negInf);
    aR.assign(static_cast<size_t>(T), S(0));
    bR.assign(static_cast<size_t>(T), S(0));
    for (Index c = 0; c < C; ++c) {
      const S d = w(c) / S(T);

      // Left scan: state before visiting t equals sum_{i < t} with the
      // (t - i - 1) lag, kept as (p, a, b) ~ e^p * (a, b).
      S p = negInf, a = S(0), b = S(0);
      for (Index t = 0; t < T; ++t) {
        pL[static_cast<size_t>(t)] = p;
        aL[static_cast<size_t>(t)] = a;
        bL[static_cast<size_t>(t)] = b;
        const S kt = k(seg.begin + t, c);
        const S pNew = std::max(p - d, kt);
        const S keep = std::exp(p - d - pNew);
        const S grow = std::exp(kt - pNew);
        a = keep * a + grow * v(seg.begin + t, c);
        b = keep * b + grow;
        p = pNew;
      }

      // Right scan mirrors it for sum_{i > t}.
      p = negInf;
      a = S(0);
      b = S(0);
      for (Index t = T - 1; t >= 0; --t) {
        pR[static_cast<size_t>(t)] = p;
        aR[static_cast<size_t>(t)] = a;
        bR[static_cast<size_t>(t)] = b;
        const S kt = k(seg.begin + t, c);
        const S pNew = std::max(p - d, kt);
        const S keep = std::exp(p - d - pNew);
        const S grow = std::exp(kt - pNew);
        a = keep * a + grow * v(seg.begin + t, c);
        b = keep * b + grow;
        p = pNew;
      }

      for (Index t = 0; t < T; ++t) {
        const S self = u(c) + k(seg.begin + t, c);
        const size_t s = static_cast<size_t>(t);
        const S q = std::max(std::max(pL[s], pR[s]), self);
        const S fl = std::exp(pL[s] - q);
        const S fr = std::exp(pR[s] - q);
        const S fs = std::exp(self - q);
        const S num = fl * aL[s] + fr * aR[s] + fs * v(seg.begin + t, c);
        const S den = fl * bL[s] + fr * bR[s] + fs;
        out(seg.begin + t, c) = num / den;
      }
    }
  }
  return out;
}

template <typename S>
struct GaWkvGrads {
  MatrixX<S> k;
  MatrixX<S> v;
  RowVectorX<S> w;
  RowVectorX<S> u;
};

template <typename S>
GaWkvGrads<S> gaWkvBackward(const MatrixX<S>& k, const MatrixX<S>& v,
                            const RowVectorX<S>& w, const RowVectorX<S>& u,
                            const std::vector<Segment>& segments,
                            const MatrixX<S>& wkv, const MatrixX<S>& g) {
  detail::requireInputs(k, v, w, u, segments);
  if (g.rows() != k.rows() || g.cols() != k.cols() || wkv.rows() != k.rows()) {
    throw std::invalid_argument("gaWkvBackward: gradient shape mismatch");
  }
  const Index C = k.cols();
  GaWkvGrads<S> out;
  out.k = MatrixX<S>::Zero(k.rows(), C);
  out.v = MatrixX<S>::Zero(k.rows(), C);
  out.w = RowVectorX<S>::Zero(C);
  out.u = RowVectorX<S>::Zero(C);

  std::vector<S> omega;
  for (const auto& seg : segments) {
    const Index T = seg.length;
    omega.assign(static_cast<size_t>(T), S(0));
    for (Index c = 0; c < C; ++c) {
      const S d = w(c) / S(T);
      for (Index t = 0; t < T; ++t) {
        const S gt = g(seg.begin + t, c);
        if (gt == S(0)) continue;
        // Row-stabilized weights omega_ti = softmax_i of the exponents.
        S m = u(c) + k(seg.begin + t, c);
        for (Index i = 0; i < T; ++i) {
          if (i == t) continue;
          const S e = k(seg.begin + i, c) - S(std::abs(t - i) - 1) * d;
          if (e > m) m = e;
        }
        S den = S(0);
        for (Index i = 0; i < T; ++i) {
          const S e = (i == t)
                          ? u(c) + k(seg.begin + t, c)
                          : k(seg.begin + i, c) - S(std::abs(t - i) - 1) * d;
          omega[static_cast<size_t>(i)] = std::exp(e - m);
          den += omega[static_cast<size_t>(i)];
        }
        const S y = wkv(seg.begin + t, c);
        for (Index i = 0; i < T; ++i) {
          const S wt = omega[static_cast<size_t>(i)] / den;
          const S vi = v(seg.begin + i, c);
          out.v(seg.begin + i, c) += gt * wt;
          out.k(seg.begin + i, c) += gt * wt * (vi - y);
          if (i == t) {
            out.u(c) += gt * wt * (vi - y);
          } else {
            out.w(c) += gt * (-S(std::abs(t - i) - 1) / S(T)) * wt * (vi - y);
          }
        }
      }
    }
  }
  return out;
}

template <typename S>
graph::Node gaWkv(graph::Graph<S>& G, graph::Node k, graph::Node v,
                  graph::Node w, graph::Node u,
                  std::vector<Segment> segments) {
  const MatrixX<S>& kv = G.value(k);
  const MatrixX<S>& vv = G.value(v);
  const RowVectorX<S> wr = G.value(w).row(0);
  const RowVectorX<S> ur = G.value(u).row(0);
  graph::Node out = G.push(gaWkvForward<S>(kv, vv, wr, ur, segments));
  G.setBackward(out, [k, v, w, u, out, segments = std::move(segments)](
                         graph::Graph<S>& G) {
    const RowVectorX<S> wr = G.value(w).row(0);
    const RowVectorX<S> ur = G.value(u).row(0);
    GaWkvGrads<S> grads = gaWkvBackward<S>(G.value(k), G.value(v), wr, ur,
                                           segments, G.value(out), G.gradOf(out));
    G.gradRef(k) += grads.k;
    G.gradRef(v) += grads.v;
    G.gradRef(w).row(0) += grads.w;
    G.gradRef(u).row(0) += grads.u;
  });
  return out;
}

}  // namespace pestvl::wkv
