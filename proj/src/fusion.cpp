#include "pawfuse/fusion.hpp"

#include "pawfuse/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pawfuse {

StdBaseline std_baseline(std::span<const double> labels) {
  if (labels.size() < 2) throw ContractError("std_baseline: need at least two labels");
  const double n = static_cast<double>(labels.size());
  double mean = 0.0;
  for (double v : labels) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : labels) ss += (v - mean) * (v - mean);
  return {std::sqrt(ss / (n - 1.0)), mean, labels.size()};
}

FusionWeights fusion_weights(const ValidationScores& scores, const StdBaseline& baseline) {
  if (!std::isfinite(scores.val_meta) || !std::isfinite(scores.val_pic) ||
      !std::isfinite(baseline.std)) {
    throw ContractError("fusion_weights: non-finite input");
  }
  const double a_meta = std::max(0.0, baseline.std - scores.val_meta);
  const double a_pic = std::max(0.0, baseline.std - scores.val_pic);
  const double total = a_meta + a_pic;
  if (!(total > 0.0)) return {0.5, 0.5, true};
  return {a_meta / total, a_pic / total, false};
}

double fuse_predict(const FusionWeights& weights, double pred_meta, double pred_pic) {
  return weights.w_meta * pred_meta + weights.w_pic * pred_pic;
}

}  // namespace pawfuse
