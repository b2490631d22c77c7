#include "pawfuse/meta_net.hpp"

#include "pawfuse/errors.hpp"
#include "pawfuse/metrics.hpp"
#include "layers.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <cmath>
#include <limits>
#include <numeric>

namespace pawfuse {
using detail::dense;
using detail::join_widths;
using detail::layer_name;
using detail::parse_widths;

void MetaNetConfig::validate() const {
  if (features == 0 || embedding_dim == 0 || reduced_dim == 0) {
    throw ContractError("meta-net config: feature, embedding and reduced dims must be positive");
  }
  for (std::size_t w : interaction_hidden) {
    if (w == 0) throw ContractError("meta-net config: zero interaction width");
  }
  for (std::size_t w : head_hidden) {
    if (w == 0) throw ContractError("meta-net config: zero head width");
  }
  if (!(learning_rate > 0.0)) throw ContractError("meta-net config: learning rate must be > 0");
  if (epochs <= 0 || batch_size == 0) {
    throw ContractError("meta-net config: epochs and batch size must be positive");
  }
}

MetaNetParams init_meta_params(const MetaNetConfig& config, Rng& rng) {
  config.validate();
  MetaNetParams p{config, {}};
  const auto E = static_cast<Eigen::Index>(config.embedding_dim);
  const auto D = static_cast<Eigen::Index>(config.reduced_dim);
  p.weights["reducer.w"] = detail::uniform_matrix(E, D, std::sqrt(6.0 / E), rng);
  p.weights["reducer.b"] = Matrix::Zero(1, D);

  const std::size_t m2 = config.high_order_width();
  detail::init_stack(p.weights, "interaction", detail::stack_widths(m2, config.interaction_hidden, m2),
                     false, rng);
  detail::init_stack(p.weights, "head",
                     detail::stack_widths(config.low_order_width() + m2, config.head_hidden, 1), true,
                     rng);
  return p;
}

Matrix embed_record(const MetadataRecord& record, const EmbeddingTable& table,
                    const Schema& schema) {
  Matrix out(static_cast<Eigen::Index>(schema.size()), static_cast<Eigen::Index>(table.dimension()));
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    auto idx = feature_index(schema[i].name);
    if (!idx) throw SchemaError(fmt::format("schema feature '{}' unknown", schema[i].name));
    const double sign = record.features[*idx] ? 1.0 : -1.0;
    try {
      out.row(static_cast<Eigen::Index>(i)) = sign * table.phrase_vector(schema[i].column);
    } catch (const VocabularyError& e) {
      missing.insert(missing.end(), e.missing_tokens.begin(), e.missing_tokens.end());
    }
  }
  if (!missing.empty()) {
    throw VocabularyError(fmt::format("tokens missing from embedding table: {}",
                                      fmt::join(missing, ", ")),
                          std::move(missing));
  }
  return out;
}

LowOrderFeatures reduce_and_normalize(const Matrix& embedded, const MetaNetParams& params) {
  const Matrix& w = params.weights.at("reducer.w");
  if (embedded.cols() != w.rows()) {
    throw DimensionError(fmt::format("reduce_and_normalize: input has {} columns, reducer expects {}",
                                     embedded.cols(), w.rows()));
  }
  Matrix hidden = embedded * w;
  hidden.rowwise() += params.weights.at("reducer.b").row(0);
  auto normalized = l2_normalize_rows(hidden.cwiseMax(0.0));
  return {std::move(normalized.rows), std::move(normalized.degenerate_rows)};
}

InteractionMatrix interact(const LowOrderFeatures& low) { return {row_gram(low.rows)}; }

double predict_embedded(const Matrix& embedded, const MetaNetParams& params) {
  const MetaNetConfig& cfg = params.config;
  if (static_cast<std::size_t>(embedded.rows()) != cfg.features) {
    throw DimensionError(fmt::format("meta-net: expected {} feature rows, got {}", cfg.features,
                                     embedded.rows()));
  }
  const LowOrderFeatures low = reduce_and_normalize(embedded, params);
  const Matrix high = interact(low).values;

  RowVector h = high.reshaped<Eigen::RowMajor>(1, high.size());
  for (std::size_t k = 0; k <= cfg.interaction_hidden.size(); ++k) {
    h = dense(h, params.weights, "interaction", k).cwiseMax(0.0);
  }
  if (cfg.drop_interactions) h.setZero();

  RowVector x(low.rows.size() + h.size());
  x << low.rows.reshaped<Eigen::RowMajor>(1, low.rows.size()), h;
  const std::size_t layers = cfg.head_hidden.size() + 1;
  for (std::size_t k = 0; k < layers; ++k) {
    x = dense(x, params.weights, "head", k);
    if (k + 1 < layers) x = x.cwiseMax(0.0);
  }
  return stable_sigmoid(x(0));
}

double meta_forward(const MetadataRecord& record, const MetaNetParams& params,
                    const EmbeddingTable& table, const Schema& schema) {
  return predict_embedded(embed_record(record, table, schema), params);
}

Var build_meta_graph(Graph& g, Var embedded, const MetaNetConfig& config) {
  Var low = l2norm_rows(relu(add(matmul(embedded, g.parameter("reducer.w")),
                                 g.parameter("reducer.b"))));
  Var high = flatten(matmul(low, transpose(low)));
  for (std::size_t k = 0; k <= config.interaction_hidden.size(); ++k) {
    high = relu(dense(g, high, "interaction", k));
  }
  if (config.drop_interactions) {
    high = g.constant(Matrix::Zero(1, static_cast<Eigen::Index>(config.high_order_width())));
  }
  Var x = concat({flatten(low), high});
  const std::size_t layers = config.head_hidden.size() + 1;
  for (std::size_t k = 0; k < layers; ++k) {
    x = dense(g, x, "head", k);
    if (k + 1 < layers) x = relu(x);
  }
  return sigmoid(x);
}

Var build_meta_loss(Graph& g, std::span<const Matrix> embedded, std::span<const double> targets,
                    const MetaNetConfig& config) {
  if (embedded.empty() || embedded.size() != targets.size()) {
    throw ContractError("meta-net loss: need one target per record");
  }
  std::vector<Var> preds;
  preds.reserve(embedded.size());
  for (const Matrix& e : embedded) preds.push_back(build_meta_graph(g, g.constant(e), config));
  Matrix y(1, static_cast<Eigen::Index>(targets.size()));
  for (std::size_t i = 0; i < targets.size(); ++i) y(0, static_cast<Eigen::Index>(i)) = targets[i];
  return sqrt(mean(square(sub(concat(preds), g.constant(std::move(y))))));
}

namespace {

double dataset_rmse(const std::vector<Matrix>& embedded, const std::vector<double>& targets,
                    const MetaNetParams& params) {
  RowVector preds(static_cast<Eigen::Index>(embedded.size()));
  for (std::size_t i = 0; i < embedded.size(); ++i) {
    preds(static_cast<Eigen::Index>(i)) = predict_embedded(embedded[i], params);
  }
  return rmse(preds, Eigen::Map<const RowVector>(targets.data(), preds.size())) * 100.0;
}

void embed_labeled(std::span<const MetadataRecord> records, const EmbeddingTable& table,
                   const Schema& schema, std::vector<Matrix>& embedded,
                   std::vector<double>& targets, const char* which) {
  for (const auto& r : records) {
    if (!r.pawpularity) {
      throw ContractError(fmt::format("train_meta: {} record '{}' has no label", which, r.id));
    }
    embedded.push_back(embed_record(r, table, schema));
    targets.push_back(normalize_label(*r.pawpularity));
  }
}

}  // namespace

MetaTrainResult train_meta(std::span<const MetadataRecord> train,
                           std::span<const MetadataRecord> val, const EmbeddingTable& table,
                           const MetaNetConfig& config, const Schema& schema) {
  config.validate();
  if (train.empty() || val.empty()) throw ContractError("train_meta: empty train or validation set");
  if (config.features != schema.size() || config.embedding_dim != table.dimension()) {
    throw ContractError("train_meta: config does not match schema or embedding table");
  }
  std::vector<Matrix> train_x, val_x;
  std::vector<double> train_y, val_y;
  embed_labeled(train, table, schema, train_x, train_y, "training");
  embed_labeled(val, table, schema, val_x, val_y, "validation");

  Rng rng(config.seed);
  MetaNetParams params = init_meta_params(config, rng);
  Adam adam({.learning_rate = config.learning_rate});

  MetaTrainResult result;
  result.params = params;
  result.val_rmse = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<Matrix> batch_x;
      std::vector<double> batch_y;
      for (std::size_t i = start; i < stop; ++i) {
        batch_x.push_back(train_x[order[i]]);
        batch_y.push_back(train_y[order[i]]);
      }
      Graph g;
      Var loss = build_meta_loss(g, batch_x, batch_y, config);
      const double value = g.forward(loss, params.weights)(0, 0);
      loss_sum += value * value * static_cast<double>(stop - start);
      adam.step(params.weights, g.backward(loss));
    }
    result.epoch_loss.push_back(std::sqrt(loss_sum / static_cast<double>(order.size())) * 100.0);

    const double val_rmse = dataset_rmse(val_x, val_y, params);
    if (val_rmse < result.val_rmse) {
      result.val_rmse = val_rmse;
      result.params = params;
      result.best_epoch = epoch;
    }
  }
  result.train_rmse = dataset_rmse(train_x, train_y, result.params);
  return result;
}

Checkpoint to_checkpoint(const MetaNetParams& params) {
  const MetaNetConfig& c = params.config;
  Checkpoint ckpt;
  ckpt.kind = kMetaCheckpointKind;
  ckpt.config = {
      {"features", std::to_string(c.features)},
      {"embedding_dim", std::to_string(c.embedding_dim)},
      {"reduced_dim", std::to_string(c.reduced_dim)},
      {"interaction_hidden", join_widths(c.interaction_hidden)},
      {"head_hidden", join_widths(c.head_hidden)},
      {"learning_rate", fmt::format("{:.17g}", c.learning_rate)},
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"seed", std::to_string(c.seed)},
      {"drop_interactions", c.drop_interactions ? "1" : "0"},
  };
  ckpt.tensors = params.weights;
  return ckpt;
}

MetaNetParams meta_params_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != kMetaCheckpointKind) {
    throw SchemaError(fmt::format("checkpoint kind '{}' is not {}", ckpt.kind, kMetaCheckpointKind));
  }
  MetaNetParams p;
  MetaNetConfig& c = p.config;
  c.features = std::stoul(ckpt.config_value("features"));
  c.embedding_dim = std::stoul(ckpt.config_value("embedding_dim"));
  c.reduced_dim = std::stoul(ckpt.config_value("reduced_dim"));
  c.interaction_hidden = parse_widths(ckpt.config_value("interaction_hidden"));
  c.head_hidden = parse_widths(ckpt.config_value("head_hidden"));
  c.learning_rate = std::stod(ckpt.config_value("learning_rate"));
  c.epochs = std::stoi(ckpt.config_value("epochs"));
  c.batch_size = std::stoul(ckpt.config_value("batch_size"));
  c.seed = std::stoull(ckpt.config_value("seed"));
  c.drop_interactions = ckpt.config_value("drop_interactions") == "1";
  c.validate();
  p.weights = ckpt.tensors;
  Rng probe(0);
  for (const auto& [name, m] : init_meta_params(c, probe).weights) {
    auto it = p.weights.find(name);
    if (it == p.weights.end() || it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw SchemaError("meta-net checkpoint: tensor " + name + " missing or misshapen");
    }
  }
  return p;
}

}  // namespace pawfuse
