#pragma once

// Reverse-mode autograd on a tape of dense Eigen values. Nodes are appended
// in evaluation order, so ids double as a topological order and backward()
// is a single reverse sweep. Gradients allocate lazily: a closure only runs
// if some consumer touched its output gradient.

#include "pestvl/types.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pestvl::graph {

struct Node {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <typename S>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  int size() const { return static_cast<int>(nodes_.size()); }

  Node input(MatrixX<S> v) { return push(std::move(v)); }

  const MatrixX<S>& value(Node n) const { return at(n).value; }

  MatrixX<S> gradient(Node n) const {
    const auto& d = at(n);
    if (d.grad) return *d.grad;
    return MatrixX<S>::Zero(d.value.rows(), d.value.cols());
  }

  void backward(Node root) {
    if (at(root).value.size() != 1) {
      throw std::logic_error("backward: root must be a scalar node");
    }
    gradRef(root).setConstant(S(1));
    for (int id = root.id; id >= 0; --id) {
      auto& n = nodes_[static_cast<size_t>(id)];
      if (n.backward && n.grad) n.backward(*this);
    }
  }

  Node add(Node a, Node b) {
    requireSameShape(a, b, "add");
    Node out = push(value(a) + value(b));
    at(out).backward = [a, b, out](Graph& G) {
      const auto& g = G.gradOf(out);
      G.gradRef(a) += g;
      G.gradRef(b) += g;
    };
    return out;
  }

  Node sub(Node a, Node b) {
    requireSameShape(a, b, "sub");
    Node out = push(value(a) - value(b));
    at(out).backward = [a, b, out](Graph& G) {
      const auto& g = G.gradOf(out);
      G.gradRef(a) += g;
      G.gradRef(b) -= g;
    };
    return out;
  }

  Node scale(Node a, S k) {
    Node out = push(value(a) * k);
    at(out).backward = [a, k, out](Graph& G) { G.gradRef(a) += G.gradOf(out) * k; };
    return out;
  }

  Node hadamard(Node a, Node b) {
    requireSameShape(a, b, "hadamard");
    Node out = push(value(a).cwiseProduct(value(b)));
    at(out).backward = [a, b, out](Graph& G) {
      const auto& g = G.gradOf(out);
      G.gradRef(a) += g.cwiseProduct(G.value(b));
      G.gradRef(b) += g.cwiseProduct(G.value(a));
    };
    return out;
  }

  Node matmul(Node a, Node b) {
    if (value(a).cols() != value(b).rows()) {
      throw std::logic_error("matmul: inner dimensions disagree");
    }
    Node out = push(value(a) * value(b));
    at(out).backward = [a, b, out](Graph& G) {
      const auto& g = G.gradOf(out);
      G.gradRef(a) += g * G.value(b).transpose();
      G.gradRef(b) += G.value(a).transpose() * g;
    };
    return out;
  }

  // a * b^T without materializing the transpose in the tape.
  Node matmulNT(Node a, Node b) {
    if (value(a).cols() != value(b).cols()) {
      throw std::logic_error("matmulNT: inner dimensions disagree");
    }
    Node out = push(value(a) * value(b).transpose());
    at(out).backward = [a, b, out](Graph& G) {
      const auto& g = G.gradOf(out);
      G.gradRef(a) += g * G.value(b);
      G.gradRef(b) += g.transpose() * G.value(a);
    };
    return out;
  }

  // bias is a 1 x C row added to every row of a.
  Node addRowBroadcast(Node a, Node bias) {
    requireRow(bias, value(a).cols(), "addRowBroadcast");
    MatrixX<S> v = value(a);
    v.rowwise() += RowVectorX<S>(value(bias).row(0));
    Node out = push(std::move(v));
    at(out).backward = [a, bias, out](Graph& G) {
      const auto& g = G.gradOf(out);
      G.gradRef(a) += g;
      G.gradRef(bias) += g.colwise().sum();
    };
    return out;
  }

  // Per-channel scaling: out(t, c) = a(t, c) * alpha(0, c).
  Node scaleChannels(Node a, Node alpha) {
    requireRow(alpha, value(a).cols(), "scaleChannels");
    MatrixX<S> v =
        value(a).array().rowwise() * value(alpha).row(0).array();
    Node out = push(std::move(v));
    at(out).backward = [a, alpha, out](Graph& G) {
      const auto& g = G.gradOf(out);
      G.gradRef(a).array() += g.array().rowwise() * G.value(alpha).row(0).array();
      G.gradRef(alpha) += g.cwiseProduct(G.value(a)).colwise().sum();
    };
    return out;
  }

  Node sigmoid(Node a) {
    MatrixX<S> v =
        (S(1) / (S(1) + (-value(a).array()).exp())).matrix();
    Node out = push(std::move(v));
    at(out).backward = [a, out](Graph& G) {
      const auto& y = G.value(out).array();
      G.gradRef(a).array() += G.gradOf(out).array() * y * (S(1) - y);
    };
    return out;
  }

  // Squared ReLU.
  Node sqrelu(Node a) {
    MatrixX<S> r = value(a).cwiseMax(S(0));
    Node out = push(r.cwiseProduct(r));
    at(out).backward = [a, out](Graph& G) {
      G.gradRef(a).array() +=
          G.gradOf(out).array() * S(2) * G.value(a).array().max(S(0));
    };
    return out;
  }

  // Exact GELU: 0.5 x (1 + erf(x / sqrt(2))).
  Node gelu(Node a) {
    const S invSqrt2 = S(1) / std::sqrt(S(2));
    MatrixX<S> v = value(a).unaryExpr([invSqrt2](S x) {
      return S(0.5) * x * (S(1) + std::erf(x * invSqrt2));
    });
    Node out = push(std::move(v));
    at(out).backward = [a, invSqrt2, out](Graph& G) {
      const S invSqrt2pi = S(1) / std::sqrt(S(2) * S(M_PI));
      MatrixX<S> d = G.value(a).unaryExpr([invSqrt2, invSqrt2pi](S x) {
        return S(0.5) * (S(1) + std::erf(x * invSqrt2)) +
               x * invSqrt2pi * std::exp(S(-0.5) * x * x);
      });
      G.gradRef(a) += G.gradOf(out).cwiseProduct(d);
    };
    return out;
  }

  // Per-row normalization over channels with learnable gain and shift
  // (population variance).
  Node layerNorm(Node a, Node gamma, Node beta, S eps = S(1e-5)) {
    const auto& x = value(a);
    requireRow(gamma, x.cols(), "layerNorm gamma");
    requireRow(beta, x.cols(), "layerNorm beta");
    const Index C = x.cols();
    VectorX<S> mu = x.rowwise().mean();
    MatrixX<S> centered = x.colwise() - mu;
    VectorX<S> invStd =
        ((centered.array().square().rowwise().sum() / S(C)) + eps)
            .sqrt()
            .inverse();
    MatrixX<S> xhat = centered.array().colwise() * invStd.array();
    MatrixX<S> y = (xhat.array().rowwise() * value(gamma).row(0).array())
                       .rowwise() +
                   value(beta).row(0).array();
    Node out = push(std::move(y));
    at(out).backward = [a, gamma, beta, out, xhat = std::move(xhat),
                        invStd = std::move(invStd), C](Graph& G) {
      const auto& g = G.gradOf(out);
      MatrixX<S> dxhat = g.array().rowwise() * G.value(gamma).row(0).array();
      VectorX<S> sum1 = dxhat.rowwise().sum();
      VectorX<S> sum2 = dxhat.cwiseProduct(xhat).rowwise().sum();
      MatrixX<S> dx =
          (dxhat * S(C) - sum1.replicate(1, C) -
           xhat.cwiseProduct(sum2.replicate(1, C)))
              .array()
              .colwise() *
          (invStd.array() / S(C));
      G.gradRef(a) += dx;
      G.gradRef(gamma) += g.cwiseProduct(xhat).colwise().sum();
      G.gradRef(beta) += g.colwise().sum();
    };
    return out;
  }

  Node softmaxRows(Node a) {
    const auto& x = value(a);
    MatrixX<S> y(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r) {
      RowVectorX<S> e = (x.row(r).array() - x.row(r).maxCoeff()).exp();
      y.row(r) = e / e.sum();
    }
    Node out = push(std::move(y));
    at(out).backward = [a, out](Graph& G) {
      const auto& g = G.gradOf(out);
      const auto& y = G.value(out);
      VectorX<S> dot = g.cwiseProduct(y).rowwise().sum();
      G.gradRef(a) +=
          y.cwiseProduct(g - dot.replicate(1, g.cols()));
    };
    return out;
  }

  // out.row(s) = a.row(perm[s]); duplicates allowed, backward scatter-adds.
  Node gatherRows(Node a, std::vector<Index> perm) {
    const auto& x = value(a);
    MatrixX<S> y(static_cast<Index>(perm.size()), x.cols());
    for (size_t s = 0; s < perm.size(); ++s) {
      if (perm[s] < 0 || perm[s] >= x.rows()) {
        throw std::logic_error("gatherRows: index out of range");
      }
      y.row(static_cast<Index>(s)) = x.row(perm[s]);
    }
    Node out = push(std::move(y));
    at(out).backward = [a, out, perm = std::move(perm)](Graph& G) {
      const auto& g = G.gradOf(out);
      auto& ga = G.gradRef(a);
      for (size_t s = 0; s < perm.size(); ++s) {
        ga.row(perm[s]) += g.row(static_cast<Index>(s));
      }
    };
    return out;
  }

  // Row-wise convex blend: out.row(t) = (1 - m(t)) a.row(t) + m(t) b.row(t),
  // with m a T x 1 node.
  Node blendRows(Node a, Node b, Node m) {
    requireSameShape(a, b, "blendRows");
    const auto& vm = value(m);
    if (vm.cols() != 1 || vm.rows() != value(a).rows()) {
      throw std::logic_error("blendRows: mask must be T x 1");
    }
    const auto& va = value(a);
    const auto& vb = value(b);
    MatrixX<S> y =
        va + ((vb - va).array().colwise() * vm.col(0).array()).matrix();
    Node out = push(std::move(y));
    at(out).backward = [a, b, m, out](Graph& G) {
      const auto& g = G.gradOf(out);
      const auto& vm = G.value(m);
      const MatrixX<S> diff = G.value(b) - G.value(a);
      G.gradRef(a) +=
          (g.array().colwise() * (S(1) - vm.col(0).array())).matrix();
      G.gradRef(b) += (g.array().colwise() * vm.col(0).array()).matrix();
      G.gradRef(m) += g.cwiseProduct(diff).rowwise().sum();
    };
    return out;
  }

  // Straight-through Gumbel-Softmax over an N x 1 score column. noise holds
  // pre-drawn Gumbel samples. hard=true emits a {0,1} multi-hot of the k
  // largest perturbed scores while the gradient flows through the soft
  // softmax((s + noise) / tau); hard=false emits the soft distribution.
  Node gumbelMask(Node scores, const VectorX<S>& noise, S tau, bool hard,
                  Index k = 1) {
    const auto& s = value(scores);
    if (s.cols() != 1 || s.rows() != noise.size()) {
      throw std::logic_error("gumbelMask: scores must be N x 1 matching noise");
    }
    if (!(tau > S(0))) throw std::logic_error("gumbelMask: tau must be positive");
    if (k < 1 || k > s.rows()) throw std::logic_error("gumbelMask: k out of range");
    VectorX<S> z = (s.col(0) + noise) / tau;
    VectorX<S> soft = (z.array() - z.maxCoeff()).exp();
    soft /= soft.sum();
    MatrixX<S> y;
    if (hard) {
      y = MatrixX<S>::Zero(s.rows(), 1);
      VectorX<S> perturbed = s.col(0) + noise;
      for (Index j = 0; j < k; ++j) {
        Index best = 0;
        for (Index i = 1; i < perturbed.size(); ++i) {
          if (perturbed(i) > perturbed(best)) best = i;
        }
        y(best, 0) = S(1);
        perturbed(best) = -std::numeric_limits<S>::infinity();
      }
    } else {
      y = soft;
    }
    Node out = push(std::move(y));
    at(out).backward = [scores, out, soft = std::move(soft), tau](Graph& G) {
      const auto& g = G.gradOf(out);
      const S dot = (g.col(0).array() * soft.array()).sum();
      G.gradRef(scores).col(0).array() +=
          soft.array() * (g.col(0).array() - dot) / tau;
    };
    return out;
  }

  // Depthwise 3x3 convolution over tokens laid out row-major on an
  // rows x cols grid, zero padding, stride 1. kernel is 9 x C with row
  // (dr+1)*3 + (dc+1) holding the tap at offset (dr, dc).
  Node depthwiseConv3x3(Node a, Node kernel, Index rows, Index cols) {
    const auto& x = value(a);
    const auto& k = value(kernel);
    if (x.rows() != rows * cols) {
      throw std::logic_error("depthwiseConv3x3: token count mismatch");
    }
    if (k.rows() != 9 || k.cols() != x.cols()) {
      throw std::logic_error("depthwiseConv3x3: kernel must be 9 x C");
    }
    MatrixX<S> y = MatrixX<S>::Zero(x.rows(), x.cols());
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        const Index t = r * cols + c;
        for (Index dr = -1; dr <= 1; ++dr) {
          const Index rr = r + dr;
          if (rr < 0 || rr >= rows) continue;
          for (Index dc = -1; dc <= 1; ++dc) {
            const Index cc = c + dc;
            if (cc < 0 || cc >= cols) continue;
            y.row(t).array() += k.row((dr + 1) * 3 + (dc + 1)).array() *
                                x.row(rr * cols + cc).array();
          }
        }
      }
    }
    Node out = push(std::move(y));
    at(out).backward = [a, kernel, out, rows, cols](Graph& G) {
      const auto& g = G.gradOf(out);
      const auto& x = G.value(a);
      const auto& k = G.value(kernel);
      auto& gx = G.gradRef(a);
      auto& gk = G.gradRef(kernel);
      for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
          const Index t = r * cols + c;
          for (Index dr = -1; dr <= 1; ++dr) {
            const Index rr = r + dr;
            if (rr < 0 || rr >= rows) continue;
            for (Index dc = -1; dc <= 1; ++dc) {
              const Index cc = c + dc;
              if (cc < 0 || cc >= cols) continue;
              const Index tap = (dr + 1) * 3 + (dc + 1);
              gx.row(rr * cols + cc).array() +=
                  k.row(tap).array() * g.row(t).array();
              gk.row(tap).array() +=
                  x.row(rr * cols + cc).array() * g.row(t).array();
            }
          }
        }
      }
    };
    return out;
  }

  // 3x3 convolution via an im2col patch matrix: tokens in, tokens out.
  // weight is (9*Cin) x Cout with patch layout (tap, cin); bias is 1 x Cout.
  Node conv2d3x3(Node a, Node weight, Node bias, Index rows, Index cols,
                 Index stride, Index pad) {
    const auto& x = value(a);
    const Index cin = x.cols();
    if (x.rows() != rows * cols) {
      throw std::logic_error("conv2d3x3: token count mismatch");
    }
    if (value(weight).rows() != 9 * cin) {
      throw std::logic_error("conv2d3x3: weight rows must be 9*Cin");
    }
    requireRow(bias, value(weight).cols(), "conv2d3x3 bias");
    const Index outRows = (rows + 2 * pad - 3) / stride + 1;
    const Index outCols = (cols + 2 * pad - 3) / stride + 1;
    MatrixX<S> patches = MatrixX<S>::Zero(outRows * outCols, 9 * cin);
    std::vector<Index> sources(static_cast<size_t>(outRows * outCols * 9), -1);
    for (Index orr = 0; orr < outRows; ++orr) {
      for (Index oc = 0; oc < outCols; ++oc) {
        const Index t = orr * outCols + oc;
        for (Index kr = 0; kr < 3; ++kr) {
          for (Index kc = 0; kc < 3; ++kc) {
            const Index rr = orr * stride + kr - pad;
            const Index cc = oc * stride + kc - pad;
            if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
            const Index tap = kr * 3 + kc;
            sources[static_cast<size_t>(t * 9 + tap)] = rr * cols + cc;
            patches.block(t, tap * cin, 1, cin) = x.row(rr * cols + cc);
          }
        }
      }
    }
    MatrixX<S> y = patches * value(weight);
    y.rowwise() += RowVectorX<S>(value(bias).row(0));
    Node out = push(std::move(y));
    at(out).backward = [a, weight, bias, out, cin,
                        patches = std::move(patches),
                        sources = std::move(sources)](Graph& G) {
      const auto& g = G.gradOf(out);
      G.gradRef(weight) += patches.transpose() * g;
      G.gradRef(bias) += g.colwise().sum();
      MatrixX<S> gPatches = g * G.value(weight).transpose();
      auto& gx = G.gradRef(a);
      const Index outTokens = g.rows();
      for (Index t = 0; t < outTokens; ++t) {
        for (Index tap = 0; tap < 9; ++tap) {
          const Index src = sources[static_cast<size_t>(t * 9 + tap)];
          if (src < 0) continue;
          gx.row(src) += gPatches.block(t, tap * cin, 1, cin);
        }
      }
    };
    return out;
  }

  // Column means as a 1 x C row.
  Node meanRows(Node a) {
    const auto& x = value(a);
    MatrixX<S> y = x.colwise().mean();
    Node out = push(std::move(y));
    at(out).backward = [a, out](Graph& G) {
      const auto& g = G.gradOf(out);
      const Index T = G.value(a).rows();
      G.gradRef(a) += (g / S(T)).replicate(T, 1);
    };
    return out;
  }

  Node concatRows(Node a, Node b) {
    const auto& va = value(a);
    const auto& vb = value(b);
    if (va.cols() != vb.cols()) {
      throw std::logic_error("concatRows: column counts disagree");
    }
    MatrixX<S> y(va.rows() + vb.rows(), va.cols());
    y.topRows(va.rows()) = va;
    y.bottomRows(vb.rows()) = vb;
    Node out = push(std::move(y));
    const Index ra = va.rows();
    at(out).backward = [a, b, out, ra](Graph& G) {
      const auto& g = G.gradOf(out);
      G.gradRef(a) += g.topRows(ra);
      G.gradRef(b) += g.bottomRows(g.rows() - ra);
    };
    return out;
  }

  Node sumAll(Node a) {
    MatrixX<S> y(1, 1);
    y(0, 0) = value(a).sum();
    Node out = push(std::move(y));
    at(out).backward = [a, out](Graph& G) {
      G.gradRef(a).array() += G.gradOf(out)(0, 0);
    };
    return out;
  }

  // Mean negative log-likelihood over rows of logits with integer labels,
  // stabilized through log-sum-exp.
  Node crossEntropyLoss(Node logits, std::vector<int> labels) {
    const auto& x = value(logits);
    if (static_cast<Index>(labels.size()) != x.rows()) {
      throw std::logic_error("crossEntropyLoss: one label per row required");
    }
    const Index B = x.rows();
    S total = S(0);
    for (Index r = 0; r < B; ++r) {
      const int y = labels[static_cast<size_t>(r)];
      if (y < 0 || y >= x.cols()) {
        throw std::logic_error("crossEntropyLoss: label out of range");
      }
      const S m = x.row(r).maxCoeff();
      const S lse = m + std::log((x.row(r).array() - m).exp().sum());
      total += lse - x(r, y);
    }
    MatrixX<S> v(1, 1);
    v(0, 0) = total / S(B);
    Node out = push(std::move(v));
    at(out).backward = [logits, out, labels = std::move(labels)](Graph& G) {
      const S g = G.gradOf(out)(0, 0);
      const auto& x = G.value(logits);
      auto& gx = G.gradRef(logits);
      const Index B = x.rows();
      for (Index r = 0; r < B; ++r) {
        RowVectorX<S> p = (x.row(r).array() - x.row(r).maxCoeff()).exp();
        p /= p.sum();
        p(labels[static_cast<size_t>(r)]) -= S(1);
        gx.row(r) += (g / S(B)) * p;
      }
    };
    return out;
  }

  // Internals shared with custom ops (the Ga-WKV op lives next to the scan).
  Node push(MatrixX<S> v) {
    nodes_.push_back(NodeData{std::move(v), std::nullopt, nullptr});
    return Node{static_cast<int>(nodes_.size()) - 1};
  }

  MatrixX<S>& gradRef(Node n) {
    auto& d = at(n);
    if (!d.grad) d.grad = MatrixX<S>::Zero(d.value.rows(), d.value.cols());
    return *d.grad;
  }

  const MatrixX<S>& gradOf(Node n) const {
    const auto& d = at(n);
    if (!d.grad) throw std::logic_error("gradOf: gradient never touched");
    return *d.grad;
  }

  void setBackward(Node n, std::function<void(Graph&)> fn) {
    at(n).backward = std::move(fn);
  }

 private:
  struct NodeData {
    MatrixX<S> value;
    std::optional<MatrixX<S>> grad;
    std::function<void(Graph&)> backward;
  };

  NodeData& at(Node n) {
    if (!n.valid() || n.id >= size()) throw std::logic_error("bad node handle");
    return nodes_[static_cast<size_t>(n.id)];
  }
  const NodeData& at(Node n) const {
    if (!n.valid() || n.id >= size()) throw std::logic_error("bad node handle");
    return nodes_[static_cast<size_t>(n.id)];
  }

  void requireSameShape(Node a, Node b, const char* op) const {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
      throw std::logic_error(std::string(op) + ": shape mismatch");
    }
  }
  void requireRow(Node v, Index cols, const char* what) const {
    if (value(v).rows() != 1 || value(v).cols() != cols) {
      throw std::logic_error(std::string(what) + ": expected a 1 x C row");
    }
  }

  std::vector<NodeData> nodes_;
};

}  // namespace pestvl::graph
