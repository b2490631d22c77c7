#pragma once

#include "pawfuse/graph.hpp"
#include "pawfuse/image.hpp"
#include "pawfuse/phash.hpp"
#include "pawfuse/records.hpp"
#include "pawfuse/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace pawfuse::testing {

std::filesystem::path data_path(const std::string& name);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// Random binary features that respect Blur = 1 => Eyes = 0.
MetadataRecord random_record(const std::string& id, Rng& rng);

/// label = 100 * (Focus XOR Eyes), other features random.
std::vector<MetadataRecord> xor_dataset(std::size_t n, std::uint64_t seed);

ImageTensor noise_image(int size, Rng& rng);
/// Smooth random blobs plus noise; distinct per seed.
ImageTensor pattern_image(int size, std::uint64_t seed);
/// Mean intensity tracks `level` in [0, 1], with mild texture.
ImageTensor brightness_image(int size, double level, Rng& rng);

enum class CorpusKind {
  meta_determined,   // label a function of metadata; images pure noise
  image_determined,  // label encoded in image brightness; metadata random
  noise,             // labels constant per fold, unrelated to any input
};

struct Corpus {
  std::filesystem::path dir;
  std::filesystem::path train_csv;
  std::filesystem::path test_csv;
  std::filesystem::path image_dir;
  std::filesystem::path embedding_file;
  std::vector<MetadataRecord> records;
};

/// Writes train.csv, test.csv (first `test_rows` ids, no labels), images/*.rgb
/// and a copy of the fixture embedding table. For CorpusKind::noise the labels
/// depend on kfold_split(n, folds, seed).
Corpus write_corpus(const std::filesystem::path& dir, CorpusKind kind, std::size_t n, std::uint64_t seed,
                    std::size_t folds = 4, std::size_t test_rows = 5, int image_size = 32);

// Independent oracles.

/// Average hash computed pixel by pixel with explicit coverage weights.
std::uint64_t reference_average_hash(const ImageTensor& image);

/// Connected components of the <= threshold graph by breadth-first search,
/// as sorted index lists sorted by first element; singletons dropped.
std::vector<std::vector<std::size_t>> brute_force_groups(const std::vector<std::uint64_t>& hashes, int threshold);

/// Central differences of `f` with respect to every entry of `x`.
Matrix finite_difference_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x, double eps = 1e-5);

/// Builds the graph with `build`, runs backward, and compares every parameter
/// gradient with central differences. Returns the worst per-tensor
/// ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-8).
double max_gradient_error(const std::function<Var(Graph&)>& build, const Bindings& bindings, double eps = 1e-5);

/// Smallest |x| over the inputs of every relu node after a forward pass;
/// +inf when the graph has no relu.
double relu_kink_margin(const Graph& g);

/// Replaces every entry with a uniform draw from [lo, hi].
void randomize(Bindings& params, Rng& rng, double lo, double hi);

}  // namespace pawfuse::testing
