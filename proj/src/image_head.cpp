#include "pawfuse/image_head.hpp"

#include "pawfuse/errors.hpp"
#include "pawfuse/metrics.hpp"
#include "layers.hpp"

#include <fmt/format.h>

#include <limits>
#include <numeric>

namespace pawfuse {

using detail::dense;

ImageTensor Backbone::fit_input(const ImageTensor& image) const {
  return resize_bilinear(image, input_height(), input_width());
}

RowVector Backbone::apply(const ImageTensor& image, const ParameterSet& params) const {
  Graph g;
  Var features = build(g, fit_input(image));
  return g.forward(features, params);
}

ReferenceBackbone::ReferenceBackbone(ReferenceBackboneConfig config) : config_(config) {
  if (config_.input_size <= 0 || config_.patch_size <= 0 || config_.embed_dim == 0 ||
      config_.input_size % config_.patch_size != 0) {
    throw ContractError("reference backbone: patch size must evenly divide a positive input size");
  }
}

Matrix ReferenceBackbone::patches(const ImageTensor& image) const {
  const int p = config_.patch_size;
  if (image.height != config_.input_size || image.width != config_.input_size) {
    throw DimensionError(fmt::format("reference backbone: expected {0}x{0} input, got {1}x{2}",
                                     config_.input_size, image.height, image.width));
  }
  const int per_side = config_.input_size / p;
  Matrix out(per_side * per_side, p * p * ImageTensor::kChannels);
  for (int py = 0; py < per_side; ++py) {
    for (int px = 0; px < per_side; ++px) {
      const Eigen::Index row = py * per_side + px;
      Eigen::Index col = 0;
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          for (int c = 0; c < ImageTensor::kChannels; ++c) {
            out(row, col++) = image.at(py * p + y, px * p + x, c);
          }
        }
      }
    }
  }
  return out;
}

Var ReferenceBackbone::build(Graph& g, const ImageTensor& image) const {
  Matrix p = patches(image);
  const auto n = p.rows();
  Var embedded = relu(add(matmul(g.constant(std::move(p)), g.parameter("backbone.patch.w")),
                          g.parameter("backbone.patch.b")));
  return matmul(g.constant(Matrix::Constant(1, n, 1.0 / static_cast<double>(n))), embedded);
}

ParameterSet ReferenceBackbone::init_parameters(Rng& rng) const {
  const auto in = static_cast<Eigen::Index>(config_.patch_size * config_.patch_size * ImageTensor::kChannels);
  const auto out = static_cast<Eigen::Index>(config_.embed_dim);
  ParameterSet w;
  w["backbone.patch.w"] = detail::uniform_matrix(in, out, std::sqrt(6.0 / static_cast<double>(in)), rng);
  w["backbone.patch.b"] = Matrix::Constant(1, out, 0.01);
  return w;
}

std::vector<std::pair<std::string, std::string>> ReferenceBackbone::describe() const {
  return {{"backbone.input_size", std::to_string(config_.input_size)},
          {"backbone.patch_size", std::to_string(config_.patch_size)},
          {"backbone.embed_dim", std::to_string(config_.embed_dim)}};
}

void ImageHeadConfig::validate() const {
  for (std::size_t w : head_hidden) {
    if (w == 0) throw ContractError("image head config: zero hidden width");
  }
  if (!(learning_rate > 0.0)) throw ContractError("image head config: learning rate must be > 0");
  if (epochs <= 0 || batch_size == 0) {
    throw ContractError("image head config: epochs and batch size must be positive");
  }
  augmentation.validate();
}

ImageHeadParams init_image_params(const Backbone& backbone, const ImageHeadConfig& config, Rng& rng) {
  config.validate();
  ImageHeadParams p{config.head_hidden, backbone.init_parameters(rng)};
  detail::init_stack(p.weights, "head", detail::stack_widths(backbone.feature_dim(), config.head_hidden, 1),
                     true, rng);
  return p;
}

void zero_head(ImageHeadParams& params) {
  for (auto& [name, m] : params.weights) {
    if (name.rfind("head.", 0) == 0) m.setZero();
  }
}

Var build_image_graph(Graph& g, const Backbone& backbone, const ImageTensor& input,
                      const std::vector<std::size_t>& head_hidden) {
  Var x = backbone.build(g, input);
  const std::size_t layers = head_hidden.size() + 1;
  for (std::size_t k = 0; k < layers; ++k) {
    x = dense(g, x, "head", k);
    if (k + 1 < layers) x = relu(x);
  }
  return sigmoid(x);
}

Var build_image_loss(Graph& g, const Backbone& backbone, std::span<const ImageTensor> inputs,
                     std::span<const double> targets, const std::vector<std::size_t>& head_hidden) {
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw ContractError("image loss: need one target per image");
  }
  std::vector<Var> preds;
  preds.reserve(inputs.size());
  for (const auto& img : inputs) preds.push_back(build_image_graph(g, backbone, img, head_hidden));
  Matrix y(1, static_cast<Eigen::Index>(targets.size()));
  for (std::size_t i = 0; i < targets.size(); ++i) y(0, static_cast<Eigen::Index>(i)) = targets[i];
  return bce(concat(preds), g.constant(std::move(y)));
}

double predict_image(const ImageTensor& image, const Backbone& backbone, const ImageHeadParams& params) {
  Graph g;
  Var pred = build_image_graph(g, backbone, backbone.fit_input(image), params.head_hidden);
  return g.forward(pred, params.weights)(0, 0);
}

double tta_predict(const ImageTensor& image, const Backbone& backbone, const ImageHeadParams& params,
                   const AugmentationSpec& spec, int n_views, Rng& rng) {
  if (n_views < 1) throw ContractError("tta_predict: n_views must be >= 1");
  const ImageTensor input = backbone.fit_input(image);
  double total = 0.0;
  for (int v = 0; v < n_views; ++v) {
    Graph g;
    const ImageTensor view = v == 0 ? input : augment(input, spec, rng);
    Var pred = build_image_graph(g, backbone, view, params.head_hidden);
    total += g.forward(pred, params.weights)(0, 0);
  }
  return total / n_views;
}

namespace {

struct PreparedSet {
  std::vector<ImageTensor> inputs;
  std::vector<double> targets;
};

PreparedSet prepare(std::span<const LabeledImage> samples, const Backbone& backbone, const char* which) {
  PreparedSet out;
  for (const auto& s : samples) {
    if (!s.pawpularity) {
      throw ContractError(fmt::format("train_image: {} sample '{}' has no label", which, s.id));
    }
    validate_image(s.image);
    out.inputs.push_back(backbone.fit_input(s.image));
    out.targets.push_back(normalize_label(*s.pawpularity));
  }
  return out;
}

double dataset_rmse(const PreparedSet& set, const Backbone& backbone, const ImageHeadParams& params) {
  RowVector preds(static_cast<Eigen::Index>(set.inputs.size()));
  for (std::size_t i = 0; i < set.inputs.size(); ++i) {
    Graph g;
    Var pred = build_image_graph(g, backbone, set.inputs[i], params.head_hidden);
    preds(static_cast<Eigen::Index>(i)) = g.forward(pred, params.weights)(0, 0);
  }
  return rmse(preds, Eigen::Map<const RowVector>(set.targets.data(), preds.size())) * 100.0;
}

}  // namespace

ImageTrainResult train_image(std::span<const LabeledImage> train, std::span<const LabeledImage> val,
                             const Backbone& backbone, const ImageHeadConfig& config) {
  config.validate();
  if (train.empty() || val.empty()) throw ContractError("train_image: empty train or validation set");
  const PreparedSet train_set = prepare(train, backbone, "training");
  const PreparedSet val_set = prepare(val, backbone, "validation");

  Rng rng(config.seed);
  ImageHeadParams params = init_image_params(backbone, config, rng);
  Adam adam({.learning_rate = config.learning_rate});

  ImageTrainResult result;
  result.params = params;
  result.val_rmse = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_set.inputs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    const std::uint64_t epoch_seed = derive_seed(config.augmentation.seed ^ config.seed,
                                                 static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<ImageTensor> batch;
      std::vector<double> targets;
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t idx = order[i];
        if (config.augment) {
          Rng sample_rng(derive_seed(epoch_seed, idx));
          batch.push_back(augment(train_set.inputs[idx], config.augmentation, sample_rng));
        } else {
          batch.push_back(train_set.inputs[idx]);
        }
        targets.push_back(train_set.targets[idx]);
      }
      Graph g;
      Var loss = build_image_loss(g, backbone, batch, targets, params.head_hidden);
      loss_sum += g.forward(loss, params.weights)(0, 0) * static_cast<double>(stop - start);
      adam.step(params.weights, g.backward(loss));
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));

    const double val_rmse = dataset_rmse(val_set, backbone, params);
    if (val_rmse < result.val_rmse) {
      result.val_rmse = val_rmse;
      result.params = params;
      result.best_epoch = epoch;
    }
  }
  result.train_rmse = dataset_rmse(train_set, backbone, result.params);
  return result;
}

Checkpoint to_checkpoint(const ImageHeadParams& params, const Backbone& backbone) {
  Checkpoint ckpt;
  ckpt.kind = kImageCheckpointKind;
  ckpt.config.emplace_back("backbone", backbone.kind());
  for (auto& kv : backbone.describe()) ckpt.config.push_back(std::move(kv));
  ckpt.config.emplace_back("head_hidden", detail::join_widths(params.head_hidden));
  ckpt.tensors = params.weights;
  return ckpt;
}

LoadedImageModel image_model_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != kImageCheckpointKind) {
    throw SchemaError(fmt::format("checkpoint kind '{}' is not {}", ckpt.kind, kImageCheckpointKind));
  }
  LoadedImageModel model;
  const std::string& kind = ckpt.config_value("backbone");
  if (kind != "reference") throw SchemaError("image checkpoint: unsupported backbone '" + kind + "'");
  ReferenceBackboneConfig bc;
  bc.input_size = std::stoi(ckpt.config_value("backbone.input_size"));
  bc.patch_size = std::stoi(ckpt.config_value("backbone.patch_size"));
  bc.embed_dim = std::stoul(ckpt.config_value("backbone.embed_dim"));
  model.backbone = std::make_unique<ReferenceBackbone>(bc);
  model.params.head_hidden = detail::parse_widths(ckpt.config_value("head_hidden"));
  model.params.weights = ckpt.tensors;

  ImageHeadConfig probe_config;
  probe_config.head_hidden = model.params.head_hidden;
  Rng probe(0);
  for (const auto& [name, m] : init_image_params(*model.backbone, probe_config, probe).weights) {
    auto it = model.params.weights.find(name);
    if (it == model.params.weights.end() || it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw SchemaError("image checkpoint: tensor " + name + " missing or misshapen");
    }
  }
  return model;
}

}  // namespace pawfuse
