#pragma once

#include "pawfuse/adam.hpp"
#include "pawfuse/augment.hpp"
#include "pawfuse/checkpoint.hpp"
#include "pawfuse/graph.hpp"
#include "pawfuse/image.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pawfuse {

/// Feature extractor seam. Implementations add their subgraph to a Graph so
/// the regression head can train through them; trainable weights live in the
/// caller's ParameterSet under a "backbone." prefix.
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual int input_height() const = 0;
  virtual int input_width() const = 0;
  virtual std::size_t feature_dim() const = 0;

  /// `image` must already be input_height() x input_width(). Returns a
  /// 1 x feature_dim() node.
  virtual Var build(Graph& g, const ImageTensor& image) const = 0;
  virtual ParameterSet init_parameters(Rng& rng) const = 0;

  /// Identifies the implementation in checkpoints.
  virtual std::string kind() const = 0;
  virtual std::vector<std::pair<std::string, std::string>> describe() const { return {}; }

  /// Resizes as needed and evaluates the features outside any training graph.
  RowVector apply(const ImageTensor& image, const ParameterSet& params) const;
  ImageTensor fit_input(const ImageTensor& image) const;
};

struct ReferenceBackboneConfig {
  int input_size = 32;
  int patch_size = 8;
  std::size_t embed_dim = 16;
};

/// Non-overlapping square patches, shared linear projection with ReLU,
/// mean-pooled over patches.
class ReferenceBackbone final : public Backbone {
 public:
  explicit ReferenceBackbone(ReferenceBackboneConfig config = {});

  int input_height() const override { return config_.input_size; }
  int input_width() const override { return config_.input_size; }
  std::size_t feature_dim() const override { return config_.embed_dim; }
  Var build(Graph& g, const ImageTensor& image) const override;
  ParameterSet init_parameters(Rng& rng) const override;
  std::string kind() const override { return "reference"; }
  std::vector<std::pair<std::string, std::string>> describe() const override;

  const ReferenceBackboneConfig& config() const { return config_; }
  /// (patches) x (patch_size^2 * 3), each patch flattened row-major HWC.
  Matrix patches(const ImageTensor& image) const;

 private:
  ReferenceBackboneConfig config_;
};

struct ImageHeadConfig {
  std::vector<std::size_t> head_hidden{32};
  double learning_rate = 2e-5;
  int epochs = 10;
  std::size_t batch_size = 40;
  std::uint64_t seed = 0;
  bool augment = true;
  AugmentationSpec augmentation = AugmentationSpec::standard();

  void validate() const;
};

/// Backbone weights plus `head.<k>.{w,b}`.
struct ImageHeadParams {
  std::vector<std::size_t> head_hidden;
  ParameterSet weights;
};

ImageHeadParams init_image_params(const Backbone& backbone, const ImageHeadConfig& config, Rng& rng);

/// Zeroes every head tensor, making the model output exactly 0.5.
void zero_head(ImageHeadParams& params);

Var build_image_graph(Graph& g, const Backbone& backbone, const ImageTensor& input,
                      const std::vector<std::size_t>& head_hidden);

/// Mean BCE over a batch of backbone-sized images against unit-scale targets.
Var build_image_loss(Graph& g, const Backbone& backbone, std::span<const ImageTensor> inputs,
                     std::span<const double> targets, const std::vector<std::size_t>& head_hidden);

/// Prediction on [0, 1] for one image of any size.
double predict_image(const ImageTensor& image, const Backbone& backbone, const ImageHeadParams& params);

/// Mean prediction over `n_views` copies: the image itself, then n_views - 1
/// augmented draws.
double tta_predict(const ImageTensor& image, const Backbone& backbone, const ImageHeadParams& params,
                   const AugmentationSpec& spec, int n_views, Rng& rng);

struct LabeledImage {
  std::string id;
  ImageTensor image;
  std::optional<int> pawpularity;
};

struct ImageTrainResult {
  ImageHeadParams params;           // best-validation weights
  double val_rmse = 0.0;            // 0..100 scale
  double train_rmse = 0.0;          // 0..100 scale, un-augmented, with `params`
  int best_epoch = 0;
  std::vector<double> epoch_loss;   // mean training BCE per epoch
};

/// Adam on BCE of labels scaled to [0, 1]; model selection on validation RMSE.
ImageTrainResult train_image(std::span<const LabeledImage> train, std::span<const LabeledImage> val,
                             const Backbone& backbone, const ImageHeadConfig& config);

inline constexpr const char* kImageCheckpointKind = "image-head";

Checkpoint to_checkpoint(const ImageHeadParams& params, const Backbone& backbone);

struct LoadedImageModel {
  std::unique_ptr<Backbone> backbone;
  ImageHeadParams params;
};

LoadedImageModel image_model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace pawfuse
