#pragma once

#include "pawfuse/errors.hpp"
#include "pawfuse/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace pawfuse {

inline constexpr double kBceEpsilon = 1e-7;

/// Root mean squared error. Works on any scale; callers keep preds and labels
/// on the same one.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rmse(const Eigen::MatrixBase<DerivedA>& preds,
                               const Eigen::MatrixBase<DerivedB>& labels) {
  if (preds.size() == 0) throw ContractError("rmse: empty input");
  if (preds.size() != labels.size()) throw ContractError("rmse: length mismatch");
  using Scalar = typename DerivedA::Scalar;
  Scalar acc(0);
  for (Eigen::Index i = 0; i < preds.size(); ++i) {
    const Scalar d = labels.derived().coeff(i) - preds.derived().coeff(i);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<Scalar>(preds.size()));
}

/// Mean binary cross-entropy, -[y log p + (1-y) log(1-p)], with predictions
/// clamped to [1e-7, 1 - 1e-7]. Targets may be soft.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar bce_loss(const Eigen::MatrixBase<DerivedA>& preds,
                                   const Eigen::MatrixBase<DerivedB>& targets) {
  if (preds.size() == 0) throw ContractError("bce_loss: empty input");
  if (preds.size() != targets.size()) throw ContractError("bce_loss: length mismatch");
  using Scalar = typename DerivedA::Scalar;
  Scalar acc(0);
  for (Eigen::Index i = 0; i < preds.size(); ++i) {
    const Scalar p = std::clamp<Scalar>(preds.derived().coeff(i), Scalar(kBceEpsilon),
                                        Scalar(1) - Scalar(kBceEpsilon));
    const Scalar y = targets.derived().coeff(i);
    acc -= y * std::log(p) + (Scalar(1) - y) * std::log(Scalar(1) - p);
  }
  return acc / static_cast<Scalar>(preds.size());
}

/// Pawpularity (integer 0..100) to the unit interval.
inline double normalize_label(int pawpularity) {
  if (pawpularity < 0 || pawpularity > 100) {
    throw ContractError("normalize_label: pawpularity outside [0, 100]");
  }
  return static_cast<double>(pawpularity) / 100.0;
}

}  // namespace pawfuse
