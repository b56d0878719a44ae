#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace pestvl {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrixd = MatrixX<double>;
using Matrixf = MatrixX<float>;
using Vectord = VectorX<double>;
using Vectorf = VectorX<float>;
using MatrixXcd = Eigen::MatrixXcd;

// Token matrices are T x C: one row per spatial token (row-major over the
// H x W grid), one column per channel.
template <typename Scalar>
struct Feature {
  MatrixX<Scalar> tokens;
  Index height = 0;
  Index width = 0;

  Index tokenCount() const { return tokens.rows(); }
  Index channels() const { return tokens.cols(); }
};

}  // namespace pestvl
