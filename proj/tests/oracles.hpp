#pragma once

// Reference implementations kept deliberately independent of the library:
// direct-sum transforms and brute-force loops, no shared helpers.

#include "pestvl/partition.hpp"
#include "pestvl/types.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

namespace oracle {

using pestvl::Index;
using pestvl::Matrixd;
using pestvl::MatrixXcd;
using pestvl::Vectord;

inline MatrixXcd naiveDft2(const Matrixd& x) {
  const Index H = x.rows(), W = x.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(H) * W);
  MatrixXcd out(H, W);
  for (Index u = 0; u < H; ++u) {
    for (Index v = 0; v < W; ++v) {
      std::complex<double> acc{0.0, 0.0};
      for (Index h = 0; h < H; ++h) {
        for (Index w = 0; w < W; ++w) {
          const double ang = -2.0 * M_PI *
                             (static_cast<double>(h) * u / H +
                              static_cast<double>(w) * v / W);
          acc += x(h, w) * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      }
      out(u, v) = acc * scale;
    }
  }
  return out;
}

inline MatrixXcd naiveIdft2(const MatrixXcd& s) {
  const Index H = s.rows(), W = s.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(H) * W);
  MatrixXcd out(H, W);
  for (Index h = 0; h < H; ++h) {
    for (Index w = 0; w < W; ++w) {
      std::complex<double> acc{0.0, 0.0};
      for (Index u = 0; u < H; ++u) {
        for (Index v = 0; v < W; ++v) {
          const double ang = 2.0 * M_PI *
                             (static_cast<double>(h) * u / H +
                              static_cast<double>(w) * v / W);
          acc += s(u, v) * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      }
      out(h, w) = acc * scale;
    }
  }
  return out;
}

// Direct evaluation of the distance-decayed WKV attention, one (t, i) pair
// at a time with long-double accumulators (no streaming stabilization).
inline Matrixd naiveWkv(const Matrixd& k, const Matrixd& v,
                        const Eigen::RowVectorXd& w, const Eigen::RowVectorXd& u,
                        const std::vector<pestvl::partition::Segment>& segments) {
  Matrixd out(k.rows(), k.cols());
  for (const auto& seg : segments) {
    const Index T = seg.length;
    for (Index c = 0; c < k.cols(); ++c) {
      for (Index t = 0; t < T; ++t) {
        long double num = 0.0L, den = 0.0L;
        for (Index i = 0; i < T; ++i) {
          long double e;
          if (i == t) {
            e = static_cast<long double>(u(c)) + k(seg.begin + t, c);
          } else {
            e = static_cast<long double>(k(seg.begin + i, c)) -
                static_cast<long double>(std::abs(t - i) - 1) / T * w(c);
          }
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

// Brute-force 3x3 convolution over row-major tokens, zero padding.
inline Matrixd naiveConv3x3(const Matrixd& x, const Matrixd& weight,
                            const Eigen::RowVectorXd& bias, Index rows,
                            Index cols, Index stride, Index pad) {
  const Index cin = x.cols();
  const Index cout = weight.cols();
  const Index outRows = (rows + 2 * pad - 3) / stride + 1;
  const Index outCols = (cols + 2 * pad - 3) / stride + 1;
  Matrixd y(outRows * outCols, cout);
  for (Index orr = 0; orr < outRows; ++orr) {
    for (Index oc = 0; oc < outCols; ++oc) {
      for (Index co = 0; co < cout; ++co) {
        double acc = bias(co);
        for (Index kr = 0; kr < 3; ++kr) {
          for (Index kc = 0; kc < 3; ++kc) {
            const Index rr = orr * stride + kr - pad;
            const Index cc = oc * stride + kc - pad;
            if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
            for (Index ci = 0; ci < cin; ++ci) {
              acc += x(rr * cols + cc, ci) * weight((kr * 3 + kc) * cin + ci, co);
            }
          }
        }
        y(orr * outCols + oc, co) = acc;
      }
    }
  }
  return y;
}

inline Matrixd naiveDepthwise3x3(const Matrixd& x, const Matrixd& kernel,
                                 Index rows, Index cols) {
  Matrixd y = Matrixd::Zero(x.rows(), x.cols());
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      for (Index ch = 0; ch < x.cols(); ++ch) {
        double acc = 0.0;
        for (Index dr = -1; dr <= 1; ++dr) {
          for (Index dc = -1; dc <= 1; ++dc) {
            const Index rr = r + dr, cc = c + dc;
            if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
            acc += kernel((dr + 1) * 3 + (dc + 1), ch) * x(rr * cols + cc, ch);
          }
        }
        y(r * cols + c, ch) = acc;
      }
    }
  }
  return y;
}

// Plain scaled dot-product attention, one score at a time.
inline Matrixd naiveAttention(const Matrixd& q, const Matrixd& key,
                              const Matrixd& val) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Matrixd out(q.rows(), val.cols());
  for (Index t = 0; t < q.rows(); ++t) {
    Vectord scores(key.rows());
    for (Index i = 0; i < key.rows(); ++i) {
      double s = 0.0;
      for (Index d = 0; d < q.cols(); ++d) s += q(t, d) * key(i, d);
      scores(i) = s * scale;
    }
    const double m = scores.maxCoeff();
    Vectord e = (scores.array() - m).exp();
    e /= e.sum();
    for (Index d = 0; d < val.cols(); ++d) {
      double acc = 0.0;
      for (Index i = 0; i < key.rows(); ++i) acc += e(i) * val(i, d);
      out(t, d) = acc;
    }
  }
  return out;
}

// Central-difference gradient of a scalar functional of one matrix input.
inline Matrixd fdGradient(const std::function<double(const Matrixd&)>& f,
                          const Matrixd& x, double h = 1e-6) {
  Matrixd g(x.rows(), x.cols());
  Matrixd probe = x;
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); ++c) {
      probe(r, c) = x(r, c) + h;
      const double fp = f(probe);
      probe(r, c) = x(r, c) - h;
      const double fm = f(probe);
      probe(r, c) = x(r, c);
      g(r, c) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

// Relative disagreement with a floor so near-zero entries compare absolutely.
inline double gradDisagreement(const Matrixd& analytic, const Matrixd& fd) {
  double worst = 0.0;
  for (Index r = 0; r < analytic.rows(); ++r) {
    for (Index c = 0; c < analytic.cols(); ++c) {
      const double denom =
          std::max({std::abs(analytic(r, c)), std::abs(fd(r, c)), 1e-2});
      worst = std::max(worst, std::abs(analytic(r, c) - fd(r, c)) / denom);
    }
  }
  return worst;
}

// Mean filter via an explicitly materialized replicate-padded copy.
inline Matrixd naiveMeanFilter(const Matrixd& m, int n) {
  const Index H = m.rows(), W = m.cols(), half = n / 2;
  Matrixd padded(H + 2 * half, W + 2 * half);
  for (Index r = 0; r < padded.rows(); ++r) {
    for (Index c = 0; c < padded.cols(); ++c) {
      const Index rr = std::min(std::max<Index>(r - half, 0), H - 1);
      const Index cc = std::min(std::max<Index>(c - half, 0), W - 1);
      padded(r, c) = m(rr, cc);
    }
  }
  Matrixd out(H, W);
  for (Index r = 0; r < H; ++r) {
    for (Index c = 0; c < W; ++c) {
      out(r, c) = padded.block(r, c, n, n).mean();
    }
  }
  return out;
}

}  // namespace oracle
