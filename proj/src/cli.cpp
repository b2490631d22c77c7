#include "pawfuse/cli.hpp"

#include "pawfuse/dedup.hpp"
#include "pawfuse/eda.hpp"
#include "pawfuse/errors.hpp"
#include "pawfuse/fusion.hpp"
#include "pawfuse/kfold.hpp"
#include "pawfuse/records.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pawfuse::cli {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw SchemaError(fmt::format("config: unknown key '{}' in {}", key, where));
  }
}

ojson step_to_json(const AugmentStep& step) {
  return std::visit(
      overloaded{
          [](const FlipHorizontal& s) { return ojson{{"type", "flip_horizontal"}, {"probability", s.probability}}; },
          [](const Rotate& s) { return ojson{{"type", "rotate"}, {"max_degrees", s.max_degrees}}; },
          [](const Brightness& s) { return ojson{{"type", "brightness"}, {"max_delta", s.max_delta}}; },
          [](const Contrast& s) { return ojson{{"type", "contrast"}, {"max_factor", s.max_factor}}; },
          [](const Saturation& s) { return ojson{{"type", "saturation"}, {"max_factor", s.max_factor}}; },
          [](const RandomErase& s) {
            return ojson{{"type", "random_erase"}, {"min_area", s.min_area}, {"max_area", s.max_area}};
          },
      },
      step);
}

AugmentStep step_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "flip_horizontal") return FlipHorizontal{j.value("probability", 0.5)};
  if (type == "rotate") return Rotate{j.value("max_degrees", 15.0)};
  if (type == "brightness") return Brightness{j.value("max_delta", 0.1)};
  if (type == "contrast") return Contrast{j.value("max_factor", 0.1)};
  if (type == "saturation") return Saturation{j.value("max_factor", 0.1)};
  if (type == "random_erase") return RandomErase{j.value("min_area", 0.02), j.value("max_area", 0.1)};
  throw SchemaError("config: unknown augmentation '" + type + "'");
}

std::uint64_t fold_seed(std::uint64_t root, std::size_t fold, std::uint64_t stream) {
  return derive_seed(derive_seed(root, 1000 + fold), stream);
}

struct Sample {
  MetadataRecord record;
  ImageTensor image;
};

std::vector<Sample> load_samples(const std::vector<MetadataRecord>& records, const fs::path& image_dir) {
  std::vector<Sample> out;
  std::vector<std::string> missing;
  for (const auto& r : records) {
    auto path = find_image(image_dir, r.id);
    if (!path) {
      missing.push_back(r.id);
      continue;
    }
    out.push_back({r, load_image(*path)});
    out.back().record.image_path = *path;
  }
  if (!missing.empty()) {
    throw IoError(fmt::format("no image in {} for ids: {}", image_dir.string(), fmt::join(missing, ", ")));
  }
  return out;
}

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw ContractError(fmt::format("config: {} not set", what));
  if (!fs::is_regular_file(p)) throw IoError(fmt::format("{} not found: {}", what, p.string()));
}

template <class Fn>
int guarded(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    spdlog::error("{}: {}", name, e.what());
    return 1;
  }
}

std::string join_ids(const std::vector<std::string>& ids) { return fmt::format("{}", fmt::join(ids, ";")); }

}  // namespace

RunConfig::RunConfig() {
  image.learning_rate = 2e-5;
  image.batch_size = 40;
  meta.batch_size = 40;
}

RunConfig run_config_from_json(const json& j, const fs::path& base) {
  reject_unknown(j,
                 {"train_csv", "test_csv", "image_dir", "test_image_dir", "embedding_file", "annotation_csv",
                  "output_dir", "model_dir", "folds", "seed", "tta_views", "dedup_threshold", "hash",
                  "batch_size", "meta", "image", "backbone"},
                 "root");
  RunConfig c;
  auto path = [&](const char* key, fs::path& out) {
    if (j.contains(key)) out = resolve(base, j.at(key).get<std::string>());
  };
  path("train_csv", c.train_csv);
  path("test_csv", c.test_csv);
  path("image_dir", c.image_dir);
  path("test_image_dir", c.test_image_dir);
  path("embedding_file", c.embedding_file);
  path("annotation_csv", c.annotation_csv);
  path("output_dir", c.output_dir);
  path("model_dir", c.model_dir);
  c.folds = j.value("folds", c.folds);
  c.seed = j.value("seed", c.seed);
  c.tta_views = j.value("tta_views", c.tta_views);
  c.dedup_threshold = j.value("dedup_threshold", c.dedup_threshold);
  if (j.contains("hash")) {
    const auto h = j.at("hash").get<std::string>();
    if (h == "average") {
      c.hash = HashAlgorithm::average;
    } else if (h == "difference") {
      c.hash = HashAlgorithm::difference;
    } else {
      throw SchemaError("config: hash must be 'average' or 'difference'");
    }
  }
  if (j.contains("batch_size")) {
    c.meta.batch_size = c.image.batch_size = j.at("batch_size").get<std::size_t>();
  }
  if (j.contains("meta")) {
    const json& m = j.at("meta");
    reject_unknown(m,
                   {"embedding_dim", "reduced_dim", "interaction_hidden", "head_hidden", "learning_rate", "epochs",
                    "batch_size"},
                   "meta");
    c.meta.embedding_dim = m.value("embedding_dim", c.meta.embedding_dim);
    c.meta.reduced_dim = m.value("reduced_dim", c.meta.reduced_dim);
    c.meta.interaction_hidden = m.value("interaction_hidden", c.meta.interaction_hidden);
    c.meta.head_hidden = m.value("head_hidden", c.meta.head_hidden);
    c.meta.learning_rate = m.value("learning_rate", c.meta.learning_rate);
    c.meta.epochs = m.value("epochs", c.meta.epochs);
    c.meta.batch_size = m.value("batch_size", c.meta.batch_size);
  }
  if (j.contains("image")) {
    const json& m = j.at("image");
    reject_unknown(m, {"head_hidden", "learning_rate", "epochs", "batch_size", "augment", "augmentation"}, "image");
    c.image.head_hidden = m.value("head_hidden", c.image.head_hidden);
    c.image.learning_rate = m.value("learning_rate", c.image.learning_rate);
    c.image.epochs = m.value("epochs", c.image.epochs);
    c.image.batch_size = m.value("batch_size", c.image.batch_size);
    c.image.augment = m.value("augment", c.image.augment);
    if (m.contains("augmentation")) {
      c.image.augmentation.steps.clear();
      for (const auto& s : m.at("augmentation")) c.image.augmentation.steps.push_back(step_from_json(s));
    }
  }
  if (j.contains("backbone")) {
    const json& b = j.at("backbone");
    reject_unknown(b, {"input_size", "patch_size", "embed_dim"}, "backbone");
    c.backbone.input_size = b.value("input_size", c.backbone.input_size);
    c.backbone.patch_size = b.value("patch_size", c.backbone.patch_size);
    c.backbone.embed_dim = b.value("embed_dim", c.backbone.embed_dim);
  }
  c.meta.validate();
  c.image.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("config {}: {}", path.string(), e.what()));
  }
  return run_config_from_json(j, path.parent_path());
}

ojson to_json(const RunConfig& c) {
  ojson steps = ojson::array();
  for (const auto& s : c.image.augmentation.steps) steps.push_back(step_to_json(s));
  return {
      {"train_csv", c.train_csv.string()},
      {"test_csv", c.test_csv.string()},
      {"image_dir", c.image_dir.string()},
      {"test_image_dir", c.test_image_dir.string()},
      {"embedding_file", c.embedding_file.string()},
      {"annotation_csv", c.annotation_csv.string()},
      {"output_dir", c.output_dir.string()},
      {"model_dir", c.model_dir.string()},
      {"folds", c.folds},
      {"seed", c.seed},
      {"tta_views", c.tta_views},
      {"dedup_threshold", c.dedup_threshold},
      {"hash", std::string(algorithm_name(c.hash))},
      {"meta",
       {{"embedding_dim", c.meta.embedding_dim},
        {"reduced_dim", c.meta.reduced_dim},
        {"interaction_hidden", c.meta.interaction_hidden},
        {"head_hidden", c.meta.head_hidden},
        {"learning_rate", c.meta.learning_rate},
        {"epochs", c.meta.epochs},
        {"batch_size", c.meta.batch_size}}},
      {"image",
       {{"head_hidden", c.image.head_hidden},
        {"learning_rate", c.image.learning_rate},
        {"epochs", c.image.epochs},
        {"batch_size", c.image.batch_size},
        {"augment", c.image.augment},
        {"augmentation", steps}}},
      {"backbone",
       {{"input_size", c.backbone.input_size},
        {"patch_size", c.backbone.patch_size},
        {"embed_dim", c.backbone.embed_dim}}},
  };
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

void write_atomically(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("pawfuse");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("PAWFUSE_LOG")) {
    const std::string level = to_lower(env);
    if (level == "error") {
      spdlog::set_level(spdlog::level::err);
    } else if (level == "warn") {
      spdlog::set_level(spdlog::level::warn);
    } else if (level == "info") {
      spdlog::set_level(spdlog::level::info);
    } else if (level == "debug") {
      spdlog::set_level(spdlog::level::debug);
    } else {
      spdlog::warn("PAWFUSE_LOG='{}' not one of error|warn|info|debug; using info", env);
    }
  }
}

int cmd_eda(const RunConfig& config) {
  return guarded("eda", [&] {
    require_file(config.train_csv, "train_csv");
    const auto records = parse_csv(config.train_csv);
    std::vector<std::string> warnings;
    std::vector<ImageStat> sizes;
    std::vector<HashedImage> hashed;
    for (const auto& r : records) {
      auto path = config.image_dir.empty() ? std::nullopt : find_image(config.image_dir, r.id);
      if (!path) {
        warnings.push_back(fmt::format("no image for id '{}'", r.id));
        continue;
      }
      try {
        const ImageTensor img = load_image(*path);
        sizes.push_back({r.id, img.width, img.height});
        hashed.push_back({r.id, perceptual_hash(img, config.hash), r.pawpularity});
      } catch (const Error& e) {
        warnings.push_back(fmt::format("image for id '{}' unreadable: {}", r.id, e.what()));
      }
    }
    for (const auto& w : warnings) spdlog::warn("{}", w);

    std::optional<std::vector<Annotation>> annotations;
    if (!config.annotation_csv.empty()) {
      require_file(config.annotation_csv, "annotation_csv");
      annotations = parse_annotations(config.annotation_csv);
    }
    auto groups = find_duplicates(hashed, config.dedup_threshold);
    const EdaReport report = eda_report(records, sizes, std::move(groups), config.dedup_threshold,
                                        annotations ? &*annotations : nullptr, std::move(warnings));
    write_eda_report(report, config.output_dir);
    spdlog::info("eda: {} records, {} images, {} duplicate groups -> {}", report.records, report.images_read,
                 report.duplicates.size(), config.output_dir.string());
    return 0;
  });
}

int cmd_dedup(const RunConfig& config) {
  return guarded("dedup", [&] {
    std::vector<HashedImage> hashed;
    if (!config.train_csv.empty()) {
      require_file(config.train_csv, "train_csv");
      for (const auto& s : load_samples(parse_csv(config.train_csv), config.image_dir)) {
        hashed.push_back({s.record.id, perceptual_hash(s.image, config.hash), s.record.pawpularity});
      }
    } else if (fs::is_directory(config.image_dir)) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(config.image_dir)) {
        const auto ext = to_lower(entry.path().extension().string());
        if (entry.is_regular_file() && (ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".rgb")) {
          files.push_back(entry.path());
        }
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        hashed.push_back({f.stem().string(), perceptual_hash(load_image(f), config.hash), std::nullopt});
      }
    }
    if (hashed.empty()) throw IoError("dedup: no images found");

    const auto groups = find_duplicates(hashed, config.dedup_threshold);
    std::ostringstream out;
    out << "group,size,max_distance,label_spread,ids\n";
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& grp = groups[g];
      out << fmt::format("{},{},{},{},{}\n", g, grp.ids.size(), grp.max_distance,
                         grp.label_spread ? std::to_string(*grp.label_spread) : std::string(), join_ids(grp.ids));
    }
    write_atomically(config.output_dir / "duplicates.csv", out.str());
    spdlog::info("dedup: {} images, {} groups at threshold {} (duplicates are kept)", hashed.size(), groups.size(),
                 config.dedup_threshold);
    return 0;
  });
}

int cmd_train(const RunConfig& config) {
  return guarded("train", [&] {
    using clock = std::chrono::steady_clock;
    const auto started = clock::now();
    require_file(config.train_csv, "train_csv");
    require_file(config.embedding_file, "embedding_file");
    const auto records = parse_csv(config.train_csv);
    for (const auto& r : records) {
      if (!r.pawpularity) throw ContractError("train: record '" + r.id + "' has no Pawpularity");
    }
    if (records.size() < config.folds) {
      throw ContractError(fmt::format("train: {} samples but {} folds", records.size(), config.folds));
    }
    const EmbeddingTable table = EmbeddingTable::load(config.embedding_file);
    MetaNetConfig meta_config = config.meta;
    if (meta_config.embedding_dim != table.dimension()) {
      spdlog::info("train: embedding dimension {} taken from {}", table.dimension(), config.embedding_file.string());
      meta_config.embedding_dim = table.dimension();
    }
    const auto samples = load_samples(records, config.image_dir);
    const ReferenceBackbone backbone(config.backbone);
    const FoldAssignment folds = kfold_split(samples.size(), config.folds, config.seed);

    fs::create_directories(config.output_dir);
    ojson fold_entries = ojson::array();
    ojson fusion_entries = ojson::array();
    ojson artifacts = ojson::object();
    for (std::size_t f = 0; f < config.folds; ++f) {
      const auto fold_started = clock::now();
      std::vector<MetadataRecord> train_meta_set, val_meta_set;
      std::vector<LabeledImage> train_images, val_images;
      std::vector<double> train_labels;
      for (std::size_t i : folds.training_indices(f)) {
        train_meta_set.push_back(samples[i].record);
        train_images.push_back({samples[i].record.id, samples[i].image, samples[i].record.pawpularity});
        train_labels.push_back(*samples[i].record.pawpularity);
      }
      for (std::size_t i : folds.validation_indices(f)) {
        val_meta_set.push_back(samples[i].record);
        val_images.push_back({samples[i].record.id, samples[i].image, samples[i].record.pawpularity});
      }

      MetaNetConfig mc = meta_config;
      mc.seed = fold_seed(config.seed, f, 0);
      ImageHeadConfig ic = config.image;
      ic.seed = fold_seed(config.seed, f, 1);
      ic.augmentation.seed = fold_seed(config.seed, f, 2);

      const MetaTrainResult meta = train_meta(train_meta_set, val_meta_set, table, mc);
      const ImageTrainResult image = train_image(train_images, val_images, backbone, ic);
      const StdBaseline baseline = std_baseline(train_labels);
      const FusionWeights weights = fusion_weights({meta.val_rmse, image.val_rmse}, baseline);
      if (weights.degenerate) {
        spdlog::warn("fold {}: neither model beats the label std ({:.3f}); weights fall back to 0.5/0.5, "
                     "a mean predictor may be preferable",
                     f, baseline.std);
      }

      const std::string meta_name = fmt::format("meta_fold{}.ckpt", f);
      const std::string image_name = fmt::format("image_fold{}.ckpt", f);
      save_checkpoint(config.output_dir / meta_name, to_checkpoint(meta.params));
      save_checkpoint(config.output_dir / image_name, to_checkpoint(image.params, backbone));
      artifacts[meta_name] = sha256_file(config.output_dir / meta_name);
      artifacts[image_name] = sha256_file(config.output_dir / image_name);

      const double seconds = std::chrono::duration<double>(clock::now() - fold_started).count();
      spdlog::info("fold {}: val_meta={:.4f} val_pic={:.4f} std={:.4f} w_meta={:.4f} w_pic={:.4f}{} ({:.1f}s)", f,
                   meta.val_rmse, image.val_rmse, baseline.std, weights.w_meta, weights.w_pic,
                   weights.degenerate ? " degenerate" : "", seconds);
      fusion_entries.push_back({{"fold", f},
                                {"val_m", meta.val_rmse},
                                {"val_p", image.val_rmse},
                                {"std", baseline.std},
                                {"w_meta", weights.w_meta},
                                {"w_pic", weights.w_pic},
                                {"degenerate", weights.degenerate}});
      fold_entries.push_back({{"fold", f},
                              {"train_size", train_labels.size()},
                              {"val_size", val_meta_set.size()},
                              {"val_meta", meta.val_rmse},
                              {"val_pic", image.val_rmse},
                              {"train_meta", meta.train_rmse},
                              {"train_pic", image.train_rmse},
                              {"std", baseline.std},
                              {"label_mean", baseline.mean},
                              {"w_meta", weights.w_meta},
                              {"w_pic", weights.w_pic},
                              {"degenerate", weights.degenerate},
                              {"meta_checkpoint", meta_name},
                              {"image_checkpoint", image_name},
                              {"seconds", seconds}});
    }

    write_atomically(config.output_dir / "fusion_report.json", ojson{{"scale", "0-100"}, {"folds", fusion_entries}}.dump(2) + "\n");
    artifacts["fusion_report.json"] = sha256_file(config.output_dir / "fusion_report.json");

    ojson manifest;
    manifest["version"] = 1;
    manifest["config"] = to_json(config);
    manifest["folds"] = fold_entries;
    manifest["artifacts"] = artifacts;
    manifest["seconds"] = std::chrono::duration<double>(clock::now() - started).count();
    write_atomically(config.output_dir / "manifest.json", manifest.dump(2) + "\n");
    spdlog::info("train: wrote {} folds to {}", config.folds, config.output_dir.string());
    return 0;
  });
}

int cmd_predict(const RunConfig& config) {
  return guarded("predict", [&] {
    const fs::path models = config.models();
    const fs::path manifest_path = models / "manifest.json";
    require_file(manifest_path, "manifest");
    require_file(config.test_csv, "test_csv");
    require_file(config.embedding_file, "embedding_file");

    json manifest;
    {
      std::ifstream in(manifest_path);
      manifest = json::parse(in);
    }
    for (const auto& [name, digest] : manifest.at("artifacts").items()) {
      const fs::path p = models / name;
      if (!fs::is_regular_file(p)) throw IoError("manifest references missing artifact " + p.string());
      if (sha256_file(p) != digest.get<std::string>()) throw IoError("checksum mismatch for " + p.string());
    }

    const auto records = parse_csv(config.test_csv);
    std::vector<std::string> missing;
    std::vector<ImageTensor> images;
    for (const auto& r : records) {
      auto path = find_image(config.test_images(), r.id);
      if (!path) {
        missing.push_back(r.id);
        continue;
      }
      images.push_back(load_image(*path));
    }
    if (!missing.empty()) throw IoError(fmt::format("predict: missing images for ids: {}", fmt::join(missing, ", ")));

    const EmbeddingTable table = EmbeddingTable::load(config.embedding_file);
    std::vector<double> totals(records.size(), 0.0);
    const auto& folds = manifest.at("folds");
    for (const auto& fold : folds) {
      const std::size_t f = fold.at("fold").get<std::size_t>();
      const MetaNetParams meta = meta_params_from_checkpoint(load_checkpoint(models / fold.at("meta_checkpoint").get<std::string>()));
      const LoadedImageModel image =
          image_model_from_checkpoint(load_checkpoint(models / fold.at("image_checkpoint").get<std::string>()));
      FusionWeights weights{fold.at("w_meta").get<double>(), fold.at("w_pic").get<double>(),
                            fold.at("degenerate").get<bool>()};
      AugmentationSpec tta = config.image.augmentation;
      for (std::size_t i = 0; i < records.size(); ++i) {
        Rng rng(derive_seed(fold_seed(config.seed, f, 3), i));
        const double pm = meta_forward(records[i], meta, table);
        const double pp = tta_predict(images[i], *image.backbone, image.params, tta, config.tta_views, rng);
        totals[i] += fuse_predict(weights, pm, pp);
      }
    }
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < records.size(); ++i) {
      preds.push_back({records[i].id, 100.0 * totals[i] / static_cast<double>(folds.size())});
    }
    std::ostringstream out;
    write_predictions(out, preds);
    write_atomically(config.output_dir / "predictions.csv", out.str());
    spdlog::info("predict: {} rows from {} folds -> {}", preds.size(), folds.size(),
                 (config.output_dir / "predictions.csv").string());
    return 0;
  });
}

}  // namespace pawfuse::cli
