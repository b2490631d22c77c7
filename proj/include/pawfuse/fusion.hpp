#pragma once

#include <cstddef>
#include <span>

namespace pawfuse {

/// Validation RMSEs of the two single-modality models, 0..100 scale.
struct ValidationScores {
  double val_meta = 0.0;
  double val_pic = 0.0;
};

/// Sample statistics of the training labels. `std` uses the N-1 denominator;
/// it is the RMSE a mean predictor would reach, i.e. the worst acceptable model.
struct StdBaseline {
  double std = 0.0;
  double mean = 0.0;
  std::size_t n = 0;
};

struct FusionWeights {
  double w_meta = 0.5;
  double w_pic = 0.5;
  /// Neither model beat the baseline; weights fell back to (0.5, 0.5).
  bool degenerate = false;
};

StdBaseline std_baseline(std::span<const double> labels);

/// a_m = relu(std - val_meta), a_p = relu(std - val_pic); weights are a / (a_m + a_p).
/// Scale-invariant: multiplying all three inputs by k > 0 leaves the result unchanged.
FusionWeights fusion_weights(const ValidationScores& scores, const StdBaseline& baseline);

/// Convex combination of the two unit-scale predictions.
double fuse_predict(const FusionWeights& weights, double pred_meta, double pred_pic);

}  // namespace pawfuse
