// pawfuse: metadata + image pawpularity regression with std-gated fusion.
//
//   pawfuse eda     --config run.json [--out dir]
//   pawfuse dedup   --config run.json [--threshold 0..64]
//   pawfuse train   --config run.json [--seed n] [--folds k]
//   pawfuse predict --config run.json [--tta n]

#include "pawfuse/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <optional>
#include <string>

int main(int argc, char** argv) {
  using namespace pawfuse::cli;

  CLI::App app{"pawfuse: pawpularity regression from metadata and images"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threshold;
  std::optional<std::size_t> folds;
  std::optional<int> tta;
  std::optional<std::string> train_csv, test_csv, images, test_images, embeddings, annotations, models;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration");
    cmd->add_option("--seed", seed, "root random seed");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--train-csv", train_csv, "training CSV");
    cmd->add_option("--images", images, "image directory");
    cmd->add_option("--embeddings", embeddings, "word vector file");
  };
  auto* eda = app.add_subcommand("eda", "exploratory statistics and histogram sidecars");
  common(eda);
  eda->add_option("--annotations", annotations, "id,species,count CSV");
  eda->add_option("--threshold", threshold, "Hamming threshold for duplicate reporting")->check(CLI::Range(0, 64));
  auto* dedup = app.add_subcommand("dedup", "report perceptual-hash duplicate groups");
  common(dedup);
  dedup->add_option("--threshold", threshold, "maximum Hamming distance")->check(CLI::Range(0, 64));
  auto* train = app.add_subcommand("train", "k-fold training of both models and fusion weights");
  common(train);
  train->add_option("--folds", folds, "number of folds")->check(CLI::PositiveNumber);
  auto* predict = app.add_subcommand("predict", "fused, fold-averaged predictions");
  common(predict);
  predict->add_option("--test-csv", test_csv, "test CSV");
  predict->add_option("--test-images", test_images, "test image directory");
  predict->add_option("--models", models, "directory holding manifest.json and checkpoints");
  predict->add_option("--tta", tta, "test-time augmentation views")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  configure_logging();

  RunConfig config;
  try {
    if (!config_path.empty()) config = load_run_config(config_path);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  if (seed) config.seed = *seed;
  if (out) config.output_dir = *out;
  if (threshold) config.dedup_threshold = *threshold;
  if (folds) config.folds = *folds;
  if (tta) config.tta_views = *tta;
  if (train_csv) config.train_csv = *train_csv;
  if (test_csv) config.test_csv = *test_csv;
  if (images) config.image_dir = *images;
  if (test_images) config.test_image_dir = *test_images;
  if (embeddings) config.embedding_file = *embeddings;
  if (annotations) config.annotation_csv = *annotations;
  if (models) config.model_dir = *models;

  if (*eda) return cmd_eda(config);
  if (*dedup) return cmd_dedup(config);
  if (*train) return cmd_train(config);
  return cmd_predict(config);
}
