#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace pawfuse {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;

/// Rows whose Euclidean norm falls below this are treated as degenerate.
inline constexpr double kDegenerateNormFloor = 1e-12;

template <typename Scalar>
struct RowNormalized {
  MatrixX<Scalar> rows;
  /// Indices of rows that were below the floor and were set to zero.
  std::vector<Eigen::Index> degenerate_rows;

  bool degenerate() const { return !degenerate_rows.empty(); }
};

/// Scales every row to unit L2 norm. Near-zero rows become zero rows and are
/// reported in `degenerate_rows` instead of raising.
template <typename Derived>
RowNormalized<typename Derived::Scalar> l2_normalize_rows(
    const Eigen::MatrixBase<Derived>& x,
    typename Derived::Scalar floor = typename Derived::Scalar(kDegenerateNormFloor)) {
  using Scalar = typename Derived::Scalar;
  RowNormalized<Scalar> out;
  out.rows.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Scalar norm = x.row(i).norm();
    if (norm < floor) {
      out.rows.row(i).setZero();
      out.degenerate_rows.push_back(i);
    } else {
      out.rows.row(i) = x.row(i) / norm;
    }
  }
  return out;
}

/// Pairwise row dot products, F * F^T. The upper triangle is computed and
/// mirrored so the result is exactly symmetric.
template <typename Derived>
MatrixX<typename Derived::Scalar> row_gram(const Eigen::MatrixBase<Derived>& f) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index m = f.rows();
  MatrixX<Scalar> g(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      const Scalar d = f.row(i).dot(f.row(j));
      g(i, j) = d;
      g(j, i) = d;
    }
  }
  return g;
}

/// Numerically stable logistic function.
template <typename Scalar>
Scalar stable_sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

}  // namespace pawfuse
