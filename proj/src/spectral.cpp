#include "pestvl/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace pestvl::spectral {

namespace {

void requireNonEmpty(Index rows, Index cols) {
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("spectral: matrix must be at least 1x1");
  }
}

void requireFinite(const MatrixXcd& m) {
  if (!m.allFinite()) {
    throw std::invalid_argument("spectral: input contains non-finite values");
  }
}

enum class Direction { Forward, Inverse };

// Unscaled 1-D transforms along rows then columns, then one unitary scale.
MatrixXcd transform2d(const MatrixXcd& in, Direction dir) {
  const Index rows = in.rows();
  const Index cols = in.cols();
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);

  MatrixXcd out = in;
  std::vector<std::complex<double>> line;
  std::vector<std::complex<double>> spec;

  // A 1-point unscaled transform is the identity; the FFT backend does not
  // accept length-1 inputs.
  if (cols > 1) {
    line.resize(static_cast<size_t>(cols));
    spec.resize(static_cast<size_t>(cols));
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) line[static_cast<size_t>(c)] = out(r, c);
      if (dir == Direction::Forward) {
        fft.fwd(spec, line);
      } else {
        fft.inv(spec, line);
      }
      for (Index c = 0; c < cols; ++c) out(r, c) = spec[static_cast<size_t>(c)];
    }
  }

  if (rows > 1) {
    line.resize(static_cast<size_t>(rows));
    spec.resize(static_cast<size_t>(rows));
    for (Index c = 0; c < cols; ++c) {
      for (Index r = 0; r < rows; ++r) line[static_cast<size_t>(r)] = out(r, c);
      if (dir == Direction::Forward) {
        fft.fwd(spec, line);
      } else {
        fft.inv(spec, line);
      }
      for (Index r = 0; r < rows; ++r) out(r, c) = spec[static_cast<size_t>(r)];
    }
  }

  out *= 1.0 / std::sqrt(static_cast<double>(rows) * static_cast<double>(cols));
  return out;
}

}  // namespace

MatrixXcd dft2(const Matrixd& img) {
  requireNonEmpty(img.rows(), img.cols());
  if (!img.allFinite()) {
    throw std::invalid_argument("dft2: image contains non-finite values");
  }
  return transform2d(img.cast<std::complex<double>>(), Direction::Forward);
}

MatrixXcd idft2(const MatrixXcd& spectrum) {
  requireNonEmpty(spectrum.rows(), spectrum.cols());
  requireFinite(spectrum);
  return transform2d(spectrum, Direction::Inverse);
}

std::pair<Matrixd, Matrixd> amplitudePhase(const MatrixXcd& spectrum) {
  requireNonEmpty(spectrum.rows(), spectrum.cols());
  requireFinite(spectrum);
  Matrixd amp(spectrum.rows(), spectrum.cols());
  Matrixd phase(spectrum.rows(), spectrum.cols());
  for (Index r = 0; r < spectrum.rows(); ++r) {
    for (Index c = 0; c < spectrum.cols(); ++c) {
      const double re = spectrum(r, c).real();
      const double im = spectrum(r, c).imag();
      amp(r, c) = std::hypot(re, im);
      phase(r, c) = (amp(r, c) == 0.0) ? 0.0 : std::atan2(im, re);
    }
  }
  return {std::move(amp), std::move(phase)};
}

Matrixd logAmplitude(const Matrixd& amplitude, double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("logAmplitude: epsilon must be positive");
  }
  if ((amplitude.array() < 0.0).any()) {
    throw std::invalid_argument("logAmplitude: amplitude must be nonnegative");
  }
  return (amplitude.array() + epsilon).log().matrix();
}

Matrixd meanFilter(const Matrixd& m, int kernelSize) {
  requireNonEmpty(m.rows(), m.cols());
  if (kernelSize < 1 || kernelSize % 2 == 0) {
    throw std::invalid_argument("meanFilter: kernel size must be odd and positive");
  }
  if (kernelSize > m.rows() || kernelSize > m.cols()) {
    throw std::invalid_argument("meanFilter: kernel size exceeds matrix extent");
  }
  const Index half = kernelSize / 2;
  const double inv = 1.0 / (static_cast<double>(kernelSize) * kernelSize);
  Matrixd out(m.rows(), m.cols());
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      double sum = 0.0;
      for (Index dr = -half; dr <= half; ++dr) {
        const Index rr = std::clamp<Index>(r + dr, 0, m.rows() - 1);
        for (Index dc = -half; dc <= half; ++dc) {
          const Index cc = std::clamp<Index>(c + dc, 0, m.cols() - 1);
          sum += m(rr, cc);
        }
      }
      out(r, c) = sum * inv;
    }
  }
  return out;
}

Matrixd spectralResidual(const Matrixd& logAmp, const Matrixd& avgLogAmp) {
  if (logAmp.rows() != avgLogAmp.rows() || logAmp.cols() != avgLogAmp.cols()) {
    throw std::invalid_argument("spectralResidual: shape mismatch");
  }
  return logAmp - avgLogAmp;
}

Matrixd gaussianBlur(const Matrixd& m, double sigma) {
  if (sigma <= 0.0) return m;
  const Index radius = std::max<Index>(1, static_cast<Index>(std::ceil(3.0 * sigma)));
  Vectord kernel(2 * radius + 1);
  for (Index i = -radius; i <= radius; ++i) {
    kernel(i + radius) = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
  }
  kernel /= kernel.sum();

  Matrixd tmp(m.rows(), m.cols());
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      double sum = 0.0;
      for (Index i = -radius; i <= radius; ++i) {
        const Index cc = std::clamp<Index>(c + i, 0, m.cols() - 1);
        sum += kernel(i + radius) * m(r, cc);
      }
      tmp(r, c) = sum;
    }
  }
  Matrixd out(m.rows(), m.cols());
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      double sum = 0.0;
      for (Index i = -radius; i <= radius; ++i) {
        const Index rr = std::clamp<Index>(r + i, 0, m.rows() - 1);
        sum += kernel(i + radius) * tmp(rr, c);
      }
      out(r, c) = sum;
    }
  }
  return out;
}

Matrixd minMaxNormalize(const Matrixd& m) {
  requireNonEmpty(m.rows(), m.cols());
  const double lo = m.minCoeff();
  const double hi = m.maxCoeff();
  if (hi <= lo) return Matrixd::Zero(m.rows(), m.cols());
  return ((m.array() - lo) / (hi - lo)).matrix();
}

Matrixd luminance(const Matrixd& r, const Matrixd& g, const Matrixd& b) {
  if (r.rows() != g.rows() || r.rows() != b.rows() || r.cols() != g.cols() ||
      r.cols() != b.cols()) {
    throw std::invalid_argument("luminance: channel shape mismatch");
  }
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

Matrixd averagePool(const Matrixd& m, Index factorRows, Index factorCols) {
  if (factorRows < 1 || factorCols < 1 || m.rows() % factorRows != 0 ||
      m.cols() % factorCols != 0) {
    throw std::invalid_argument("averagePool: factors must divide the shape");
  }
  Matrixd out(m.rows() / factorRows, m.cols() / factorCols);
  const double inv = 1.0 / (static_cast<double>(factorRows) * factorCols);
  for (Index r = 0; r < out.rows(); ++r) {
    for (Index c = 0; c < out.cols(); ++c) {
      out(r, c) = m.block(r * factorRows, c * factorCols, factorRows, factorCols).sum() * inv;
    }
  }
  return out;
}

Matrixd saliencyMap(const Matrixd& gray, const SaliencyOptions& opt) {
  const MatrixXcd spectrum = dft2(gray);
  auto [amp, phase] = amplitudePhase(spectrum);
  const Matrixd logAmp = logAmplitude(amp, opt.epsilon);
  const Matrixd avgLogAmp = meanFilter(logAmp, opt.kernelSize);
  const Matrixd residual = spectralResidual(logAmp, avgLogAmp);

  const Matrixd recombinedAmp = opt.exponentiate
                                    ? Matrixd(residual.array().exp().matrix())
                                    : residual;
  MatrixXcd recombined(gray.rows(), gray.cols());
  for (Index r = 0; r < gray.rows(); ++r) {
    for (Index c = 0; c < gray.cols(); ++c) {
      recombined(r, c) = std::polar(1.0, phase(r, c)) * recombinedAmp(r, c);
    }
  }

  const MatrixXcd field = idft2(recombined);
  Matrixd sal = field.cwiseAbs2();
  if (opt.smoothSigma > 0.0) sal = gaussianBlur(sal, opt.smoothSigma);
  if (opt.normalize) sal = minMaxNormalize(sal);
  return sal;
}

}  // namespace pestvl::spectral
