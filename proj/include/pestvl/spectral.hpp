#pragma once

#include <utility>

#include "pestvl/types.hpp"

namespace pestvl::spectral {

// Frequency-domain saliency. All spectral math runs in double precision
// regardless of the model scalar; log/exp conditioning is too poor for f32.

// Unitary 2-D DFT: F(u,v) = 1/sqrt(HW) * sum_{h,w} x(h,w) e^{-j2pi(hu/H + wv/W)}.
// Throws std::invalid_argument on empty or non-finite input.
MatrixXcd dft2(const Matrixd& img);

// Unitary inverse of dft2. Output is complex; callers that fed a
// conjugate-symmetric spectrum take the real part themselves.
MatrixXcd idft2(const MatrixXcd& spectrum);

// Amplitude sqrt(re^2 + im^2) and phase atan2(im, re). Zero-magnitude cells
// get phase 0.
std::pair<Matrixd, Matrixd> amplitudePhase(const MatrixXcd& spectrum);

// Elementwise ln(A + epsilon). Requires A >= 0 and epsilon > 0.
Matrixd logAmplitude(const Matrixd& amplitude, double epsilon);

// n x n arithmetic-mean filter with replicate (edge-clamp) padding, so
// constant inputs are fixed points. n must be odd, >= 1 and <= min(H, W).
Matrixd meanFilter(const Matrixd& m, int kernelSize);

// Elementwise logAmp - avgLogAmp; shapes must match.
Matrixd spectralResidual(const Matrixd& logAmp, const Matrixd& avgLogAmp);

// Separable Gaussian blur with replicate padding; sigma <= 0 is the identity.
Matrixd gaussianBlur(const Matrixd& m, double sigma);

// (v - min) / (max - min); constant inputs map to all zeros.
Matrixd minMaxNormalize(const Matrixd& m);

// 0.299 R + 0.587 G + 0.114 B.
Matrixd luminance(const Matrixd& r, const Matrixd& g, const Matrixd& b);

// Block mean pooling; rows()/cols() must be divisible by the factors.
Matrixd averagePool(const Matrixd& m, Index factorRows, Index factorCols);

struct SaliencyOptions {
  double epsilon = 1e-6;    // log floor
  int kernelSize = 3;       // mean-filter n
  bool exponentiate = false;  // reconstruct from e^R instead of R
  double smoothSigma = 0.0;   // Gaussian smoothing of the energy map; 0 = off
  bool normalize = true;      // min-max to [0,1]
};

// Full pipeline: dft2 -> amplitude/phase -> log -> mean filter -> residual ->
// recombine (R or e^R) with the original phase -> idft2 -> squared magnitude
// -> optional blur -> optional min-max normalization. Output is nonnegative.
Matrixd saliencyMap(const Matrixd& gray, const SaliencyOptions& opt = {});

}  // namespace pestvl::spectral
