#include "pestvl/selftest.hpp"

#include "pestvl/fusion.hpp"
#include "pestvl/graph.hpp"
#include "pestvl/partition.hpp"
#include "pestvl/rng.hpp"
#include "pestvl/rwkv.hpp"
#include "pestvl/spectral.hpp"
#include "pestvl/wkv.hpp"

#include <cmath>
#include <complex>
#include <random>

namespace pestvl::selftest {

namespace {

Matrixd randomMat(std::mt19937_64& gen, Index rows, Index cols,
                  double lo = -1.0, double hi = 1.0) {
  Matrixd m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = lo + (hi - lo) * uniformUnit(gen);
  return m;
}

// Direct O((HW)^2) unitary DFT sum.
MatrixXcd directDft(const Matrixd& img) {
  const Index H = img.rows(), W = img.cols();
  MatrixXcd out(H, W);
  const double norm = 1.0 / std::sqrt(double(H * W));
  for (Index u = 0; u < H; ++u) {
    for (Index v = 0; v < W; ++v) {
      std::complex<double> sum = 0.0;
      for (Index h = 0; h < H; ++h) {
        for (Index w = 0; w < W; ++w) {
          const double angle =
              -2.0 * M_PI * (double(h * u) / H + double(w * v) / W);
          sum += img(h, w) * std::complex<double>(std::cos(angle),
                                                  std::sin(angle));
        }
      }
      out(u, v) = norm * sum;
    }
  }
  return out;
}

// Direct double-loop WKV with the per-segment decay normalization.
Matrixd directWkv(const Matrixd& k, const Matrixd& v,
                  const Eigen::RowVectorXd& w, const Eigen::RowVectorXd& u,
                  const std::vector<partition::Segment>& segments) {
  Matrixd out(k.rows(), k.cols());
  for (const auto& seg : segments) {
    const Index T = seg.length;
    for (Index c = 0; c < k.cols(); ++c) {
      for (Index t = 0; t < T; ++t) {
        long double num = 0.0L, den = 0.0L;
        for (Index i = 0; i < T; ++i) {
          const long double e =
              (i == t) ? static_cast<long double>(u(c)) + k(seg.begin + t, c)
                       : static_cast<long double>(k(seg.begin + i, c)) -
                             static_cast<long double>(std::abs(t - i) - 1) /
                                 T * w(c);
          const long double weight = std::exp(e);
          num += weight * static_cast<long double>(v(seg.begin + i, c));
          den += weight;
        }
        out(seg.begin + t, c) = static_cast<double>(num / den);
      }
    }
  }
  return out;
}

SuiteResult finish(SuiteResult s) {
  s.passed = s.maxError <= s.tolerance;
  return s;
}

}  // namespace

SuiteResult runDft() {
  SuiteResult s{.name = "dft", .tolerance = 1e-10};
  std::mt19937_64 gen(101);
  for (Index side : {4, 8}) {
    const Matrixd img = randomMat(gen, side, side);
    const MatrixXcd fast = spectral::dft2(img);
    const MatrixXcd slow = directDft(img);
    s.maxError = std::max(s.maxError, (fast - slow).cwiseAbs().maxCoeff());
    const Matrixd back = spectral::idft2(fast).real();
    s.maxError = std::max(s.maxError, (back - img).cwiseAbs().maxCoeff());
  }
  s.note = "unitary transform vs direct sum, 4x4 and 8x8, with round trip";
  return finish(s);
}

SuiteResult runSaliency() {
  SuiteResult s{.name = "saliency", .tolerance = 1e-12};
  std::mt19937_64 gen(102);

  // Impulse: flat amplitude spectrum, so the residual is exactly zero.
  Matrixd impulse = Matrixd::Zero(8, 8);
  impulse(3, 5) = 1.0;
  spectral::SaliencyOptions raw;
  raw.normalize = false;
  s.maxError = spectral::saliencyMap(impulse, raw).cwiseAbs().maxCoeff();

  const Matrixd sal = spectral::saliencyMap(randomMat(gen, 8, 8, 0.0, 1.0));
  if (sal.minCoeff() < 0.0 || sal.maxCoeff() > 1.0) s.maxError = 1.0;
  s.note = "impulse zero residual; normalized outputs inside [0,1]";
  return finish(s);
}

SuiteResult runWkv() {
  SuiteResult s{.name = "wkv", .tolerance = 1e-5};
  std::mt19937_64 gen(103);
  for (Index len : {1, 4, 8, 16}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Index T = 2 * len;
      const Matrixd k = randomMat(gen, T, 2, -2.0, 2.0);
      const Matrixd v = randomMat(gen, T, 2);
      const Eigen::RowVectorXd w = randomMat(gen, 1, 2, 0.2, 4.0).row(0);
      const Eigen::RowVectorXd u = randomMat(gen, 1, 2).row(0);
      const std::vector<partition::Segment> segs{{0, len}, {len, len}};
      const Matrixd fast = wkv::gaWkvForward<double>(k, v, w, u, segs);
      const Matrixd slow = directWkv(k, v, w, u, segs);
      double rel = 0.0;
      for (Index i = 0; i < T; ++i) {
        for (Index c = 0; c < 2; ++c) {
          rel = std::max(rel, std::abs(fast(i, c) - slow(i, c)) /
                                  std::max(1e-12, std::abs(slow(i, c))));
        }
      }
      s.maxError = std::max(s.maxError, rel);
      // Convex-combination bound per channel per segment.
      for (const auto& seg : segs) {
        for (Index c = 0; c < 2; ++c) {
          const auto slice = v.col(c).segment(seg.begin, seg.length);
          const auto outSlice = fast.col(c).segment(seg.begin, seg.length);
          const double slack = std::max(slice.maxCoeff(), outSlice.maxCoeff()) -
                               std::min(slice.minCoeff(), outSlice.minCoeff());
          if (outSlice.maxCoeff() > slice.maxCoeff() + 1e-6 ||
              outSlice.minCoeff() < slice.minCoeff() - 1e-6) {
            s.maxError = std::max(s.maxError, slack);
          }
        }
      }
    }
  }
  s.note = "linear scan vs direct double loop, segment lengths 1/4/8/16";
  return finish(s);
}

SuiteResult runAttention() {
  SuiteResult s{.name = "attention", .tolerance = 1e-12};
  std::mt19937_64 gen(104);
  const Index T = 6, Ttxt = 3, C = 5, A = 4;
  const Matrixd f = randomMat(gen, T, C);
  const Matrixd txt = randomMat(gen, Ttxt, C);
  const Matrixd wq = randomMat(gen, C, A);
  const Matrixd wk = randomMat(gen, C, A);
  const Matrixd wv = randomMat(gen, C, C);

  graph::Graph<double> G;
  graph::Node q = G.matmul(G.input(f), G.input(wq));
  graph::Node k = G.matmul(G.input(txt), G.input(wk));
  graph::Node v = G.matmul(G.input(txt), G.input(wv));
  graph::Node att =
      G.softmaxRows(G.scale(G.matmulNT(q, k), 1.0 / std::sqrt(double(A))));
  graph::Node out = G.matmul(att, v);

  // Independent evaluation with explicitly stabilized softmax.
  const Matrixd scores = (f * wq) * (txt * wk).transpose() / std::sqrt(double(A));
  Matrixd weights(T, Ttxt);
  for (Index i = 0; i < T; ++i) {
    const double m = scores.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (scores.row(i).array() - m).exp();
    weights.row(i) = e / e.sum();
  }
  const Matrixd expect = weights * (txt * wv);

  s.maxError = (G.value(out) - expect).cwiseAbs().maxCoeff();
  const Matrixd rowSums = G.value(att).rowwise().sum();
  s.maxError =
      std::max(s.maxError, (rowSums.array() - 1.0).abs().maxCoeff());
  s.note = "cross-attention vs stabilized-softmax oracle; rows sum to one";
  return finish(s);
}

SuiteResult runGradients() {
  SuiteResult s{.name = "gradients", .tolerance = 1e-6};
  std::mt19937_64 gen(105);
  const Index T = 4, Ttxt = 2, C = 3, A = 2;
  std::vector<Matrixd> inputs = {
      randomMat(gen, T, C),    // features
      randomMat(gen, Ttxt, C), // text
      randomMat(gen, C, A),    // wq
      randomMat(gen, C, A),    // wk
      randomMat(gen, C, C),    // wv
  };

  auto build = [&](graph::Graph<double>& G,
                   std::vector<graph::Node>& nodes) {
    nodes.clear();
    for (const auto& m : inputs) nodes.push_back(G.input(m));
    graph::Node q = G.matmul(nodes[0], nodes[2]);
    graph::Node k = G.matmul(nodes[1], nodes[3]);
    graph::Node v = G.matmul(nodes[1], nodes[4]);
    graph::Node att =
        G.softmaxRows(G.scale(G.matmulNT(q, k), 1.0 / std::sqrt(double(A))));
    return G.sumAll(G.hadamard(G.matmul(att, v), G.matmul(att, v)));
  };

  graph::Graph<double> G;
  std::vector<graph::Node> nodes;
  graph::Node loss = build(G, nodes);
  G.backward(loss);

  const double h = 1e-6;
  for (size_t which = 0; which < inputs.size(); ++which) {
    const Matrixd analytic = G.gradOf(nodes[which]);
    for (Index r = 0; r < inputs[which].rows(); ++r) {
      for (Index c = 0; c < inputs[which].cols(); ++c) {
        const double keep = inputs[which](r, c);
        auto probe = [&](double x) {
          inputs[which](r, c) = x;
          graph::Graph<double> H;
          std::vector<graph::Node> tmp;
          const graph::Node l = build(H, tmp);
          inputs[which](r, c) = keep;
          return H.value(l)(0, 0);
        };
        const double fd = (probe(keep + h) - probe(keep - h)) / (2.0 * h);
        const double rel = std::abs(analytic(r, c) - fd) /
                           std::max({std::abs(analytic(r, c)), std::abs(fd),
                                     1e-2});
        s.maxError = std::max(s.maxError, rel);
      }
    }
  }
  s.note = "central finite differences through the attention subgraph";
  return finish(s);
}

std::vector<SuiteResult> runAll() {
  return {runDft(), runSaliency(), runWkv(), runAttention(), runGradients()};
}

}  // namespace pestvl::selftest
