#pragma once

#include "pawfuse/adam.hpp"
#include "pawfuse/checkpoint.hpp"
#include "pawfuse/embedding.hpp"
#include "pawfuse/graph.hpp"
#include "pawfuse/records.hpp"
#include "pawfuse/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pawfuse {

struct MetaNetConfig {
  std::size_t features = kFeatureCount;
  std::size_t embedding_dim = 50;
  std::size_t reduced_dim = 8;
  std::vector<std::size_t> interaction_hidden{64};
  std::vector<std::size_t> head_hidden{64};
  double learning_rate = 1e-3;
  int epochs = 100;
  std::size_t batch_size = 40;
  std::uint64_t seed = 0;
  /// Ablation switch: the activated high-order block is replaced by zeros so
  /// the head sees low-order features only.
  bool drop_interactions = false;

  std::size_t low_order_width() const { return features * reduced_dim; }
  std::size_t high_order_width() const { return features * features; }
  void validate() const;
};

/// Weights are named `reducer.{w,b}`, `interaction.<k>.{w,b}` and
/// `head.<k>.{w,b}`; biases are 1 x n rows.
struct MetaNetParams {
  MetaNetConfig config;
  ParameterSet weights;
};

MetaNetParams init_meta_params(const MetaNetConfig& config, Rng& rng);

struct LowOrderFeatures {
  Matrix rows;  // M x D, unit rows
  std::vector<Eigen::Index> degenerate_rows;
};

struct InteractionMatrix {
  Matrix values;  // M x M
};

/// M x E. Row i is the phrase vector of schema[i] scaled by +1 when the
/// feature is present and -1 when absent.
Matrix embed_record(const MetadataRecord& record, const EmbeddingTable& table,
                    const Schema& schema = default_schema());

/// Shared affine E -> D map with ReLU, then row-wise L2 normalization.
LowOrderFeatures reduce_and_normalize(const Matrix& embedded, const MetaNetParams& params);

/// Pairwise cosine matrix F_low * F_low^T.
InteractionMatrix interact(const LowOrderFeatures& low);

/// Prediction on the [0, 1] scale from an already embedded record.
double predict_embedded(const Matrix& embedded, const MetaNetParams& params);

double meta_forward(const MetadataRecord& record, const MetaNetParams& params,
                    const EmbeddingTable& table, const Schema& schema = default_schema());

/// Adds the network for one embedded record to `g`; returns the 1x1
/// prediction node. Parameters are bound by name at forward time.
Var build_meta_graph(Graph& g, Var embedded, const MetaNetConfig& config);

/// RMSE between the network outputs for `embedded` and `targets` (unit scale).
Var build_meta_loss(Graph& g, std::span<const Matrix> embedded, std::span<const double> targets,
                    const MetaNetConfig& config);

struct MetaTrainResult {
  MetaNetParams params;           // best-validation weights
  double val_rmse = 0.0;          // 0..100 scale
  double train_rmse = 0.0;        // 0..100 scale, with `params`
  int best_epoch = 0;             // 1-based
  std::vector<double> epoch_loss;  // mean training RMSE per epoch, 0..100 scale
};

/// Mini-batch Adam on RMSE of labels scaled to [0, 1].
MetaTrainResult train_meta(std::span<const MetadataRecord> train,
                           std::span<const MetadataRecord> val, const EmbeddingTable& table,
                           const MetaNetConfig& config, const Schema& schema = default_schema());

inline constexpr const char* kMetaCheckpointKind = "meta-net";

Checkpoint to_checkpoint(const MetaNetParams& params);
MetaNetParams meta_params_from_checkpoint(const Checkpoint& ckpt);

}  // namespace pawfuse
