#pragma once

#include "pawfuse/image_head.hpp"
#include "pawfuse/meta_net.hpp"
#include "pawfuse/phash.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace pawfuse::cli {

namespace fs = std::filesystem;

struct RunConfig {
  fs::path train_csv;
  fs::path test_csv;
  fs::path image_dir;
  fs::path test_image_dir;  // defaults to image_dir
  fs::path embedding_file;
  fs::path annotation_csv;  // optional
  fs::path output_dir = "pawfuse-out";
  fs::path model_dir;       // where predict reads checkpoints; defaults to output_dir

  std::size_t folds = 10;
  std::uint64_t seed = 0;
  int tta_views = 4;
  int dedup_threshold = 0;
  HashAlgorithm hash = HashAlgorithm::average;

  MetaNetConfig meta;
  ImageHeadConfig image;
  ReferenceBackboneConfig backbone;

  RunConfig();
  fs::path models() const { return model_dir.empty() ? output_dir : model_dir; }
  fs::path test_images() const { return test_image_dir.empty() ? image_dir : test_image_dir; }
};

/// Reads the JSON config. Unknown keys are rejected. Relative paths resolve
/// against the config file's directory.
RunConfig load_run_config(const fs::path& path);
RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base = {});
nlohmann::ordered_json to_json(const RunConfig& config);

/// Each command returns a process exit code; failures are logged.
int cmd_eda(const RunConfig& config);
int cmd_dedup(const RunConfig& config);
int cmd_train(const RunConfig& config);
int cmd_predict(const RunConfig& config);

/// Lowercase hex SHA-256 of a file.
std::string sha256_file(const fs::path& path);

/// Writes to `<path>.tmp` then renames over `path`.
void write_atomically(const fs::path& path, const std::string& contents);

/// Applies PAWFUSE_LOG (error | warn | info | debug) to the default logger.
void configure_logging();

}  // namespace pawfuse::cli
