#include "fixtures.hpp"

#include "pawfuse/kfold.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>

#ifndef PAWFUSE_TEST_DATA
#error "PAWFUSE_TEST_DATA must point at tests/data"
#endif

namespace pawfuse::testing {

namespace fs = std::filesystem;

fs::path data_path(const std::string& name) { return fs::path(PAWFUSE_TEST_DATA) / name; }

fs::path scratch_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "pawfuse-tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

MetadataRecord random_record(const std::string& id, Rng& rng) {
  MetadataRecord r;
  r.id = id;
  for (auto& f : r.features) f = rng.bernoulli(0.5) ? 1 : 0;
  if (r.features[11] == 1) r.features[1] = 0;
  return r;
}

std::vector<MetadataRecord> xor_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<MetadataRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    MetadataRecord r = random_record(fmt::format("xor{:04d}", i), rng);
    r.features[0] = rng.bernoulli(0.5) ? 1 : 0;
    r.features[1] = rng.bernoulli(0.5) ? 1 : 0;
    if (r.features[1] == 1) r.features[11] = 0;
    r.pawpularity = 100 * (r.features[0] ^ r.features[1]);
    out.push_back(r);
  }
  return out;
}

ImageTensor noise_image(int size, Rng& rng) {
  ImageTensor img(size, size);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

ImageTensor pattern_image(int size, std::uint64_t seed) {
  Rng rng(seed);
  ImageTensor img(size, size);
  const int blobs = 3;
  std::vector<std::array<double, 6>> params;
  for (int b = 0; b < blobs; ++b) {
    params.push_back({rng.uniform(0, size), rng.uniform(0, size), rng.uniform(3, size / 2.0), rng.uniform(),
                      rng.uniform(), rng.uniform()});
  }
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = 0.1;
        for (const auto& p : params) {
          const double d2 = (x - p[0]) * (x - p[0]) + (y - p[1]) * (y - p[1]);
          v += 0.8 * p[3 + c] * std::exp(-d2 / (2 * p[2] * p[2]));
        }
        img.at(y, x, c) = std::clamp(v + rng.uniform(-0.02, 0.02), 0.0, 1.0);
      }
    }
  }
  return img;
}

ImageTensor brightness_image(int size, double level, Rng& rng) {
  ImageTensor img(size, size);
  for (double& v : img.data) v = std::clamp(level + rng.uniform(-0.05, 0.05), 0.0, 1.0);
  return img;
}

Corpus write_corpus(const fs::path& dir, CorpusKind kind, std::size_t n, std::uint64_t seed, std::size_t folds,
                    std::size_t test_rows, int image_size) {
  Corpus c;
  c.dir = dir;
  c.image_dir = dir / "images";
  c.train_csv = dir / "train.csv";
  c.test_csv = dir / "test.csv";
  c.embedding_file = dir / "embeddings.txt";
  fs::create_directories(c.image_dir);
  fs::copy_file(data_path("embeddings_50d.txt"), c.embedding_file, fs::copy_options::overwrite_existing);

  Rng rng(seed ^ 0x5eedULL);
  FoldAssignment assignment;
  if (kind == CorpusKind::noise) assignment = kfold_split(n, folds, seed);
  for (std::size_t i = 0; i < n; ++i) {
    MetadataRecord r = random_record(fmt::format("s{:04d}", i), rng);
    ImageTensor img;
    switch (kind) {
      case CorpusKind::meta_determined:
        r.pawpularity = 10 + 40 * r.features[0] + 40 * r.features[3];
        img = noise_image(image_size, rng);
        break;
      case CorpusKind::image_determined: {
        const int label = static_cast<int>(rng.below(101));
        r.pawpularity = label;
        img = brightness_image(image_size, 0.1 + 0.8 * label / 100.0, rng);
        break;
      }
      case CorpusKind::noise:
        r.pawpularity = assignment.fold_of[i] % 2 == 0 ? 10 : 90;
        img = noise_image(image_size, rng);
        break;
    }
    save_fixture(c.image_dir / (r.id + ".rgb"), img);
    c.records.push_back(r);
  }
  {
    std::ofstream out(c.train_csv);
    write_csv(out, c.records);
  }
  {
    std::vector<MetadataRecord> test(c.records.begin(), c.records.begin() + static_cast<long>(std::min(test_rows, n)));
    for (auto& r : test) r.pawpularity.reset();
    std::ofstream out(c.test_csv);
    write_csv(out, test);
  }
  return c;
}

std::uint64_t reference_average_hash(const ImageTensor& image) {
  const int h = image.height;
  const int w = image.width;
  std::vector<double> gray(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      gray[static_cast<std::size_t>(y) * w + x] =
          0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) + 0.114 * image.at(y, x, 2);
    }
  }
  auto overlap = [](double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
  };
  double cells[64];
  for (int cy = 0; cy < 8; ++cy) {
    for (int cx = 0; cx < 8; ++cx) {
      const double y0 = cy * h / 8.0, y1 = (cy + 1) * h / 8.0;
      const double x0 = cx * w / 8.0, x1 = (cx + 1) * w / 8.0;
      double acc = 0, wt = 0;
      for (int y = 0; y < h; ++y) {
        const double oy = overlap(y0, y1, y, y + 1.0);
        if (oy == 0) continue;
        for (int x = 0; x < w; ++x) {
          const double ox = overlap(x0, x1, x, x + 1.0);
          acc += oy * ox * gray[static_cast<std::size_t>(y) * w + x];
          wt += oy * ox;
        }
      }
      cells[cy * 8 + cx] = acc / wt;
    }
  }
  double mean = 0;
  for (double v : cells) mean += v;
  mean /= 64.0;
  std::uint64_t bits = 0;
  for (int i = 0; i < 64; ++i) {
    if (cells[i] > mean) bits |= std::uint64_t{1} << (63 - i);
  }
  return bits;
}

std::vector<std::vector<std::size_t>> brute_force_groups(const std::vector<std::uint64_t>& hashes, int threshold) {
  const std::size_t n = hashes.size();
  std::vector<int> component(n, -1);
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t s = 0; s < n; ++s) {
    if (component[s] >= 0) continue;
    std::vector<std::size_t> members;
    std::deque<std::size_t> queue{s};
    component[s] = static_cast<int>(s);
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      members.push_back(u);
      for (std::size_t v = 0; v < n; ++v) {
        int d = 0;
        for (std::uint64_t x = hashes[u] ^ hashes[v]; x; x >>= 1) d += static_cast<int>(x & 1);
        if (component[v] < 0 && d <= threshold) {
          component[v] = static_cast<int>(s);
          queue.push_back(v);
        }
      }
    }
    if (members.size() >= 2) {
      std::sort(members.begin(), members.end());
      groups.push_back(std::move(members));
    }
  }
  std::sort(groups.begin(), groups.end());
  return groups;
}

Matrix finite_difference_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x, double eps) {
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + eps;
    const double up = f(probe);
    probe.data()[i] = orig - eps;
    const double down = f(probe);
    probe.data()[i] = orig;
    grad.data()[i] = (up - down) / (2 * eps);
  }
  return grad;
}

double max_gradient_error(const std::function<Var(Graph&)>& build, const Bindings& bindings, double eps) {
  Graph g;
  Var root = build(g);
  g.forward(root, bindings);
  const Gradients analytic = g.backward(root);
  double worst = 0.0;
  for (const auto& [name, a] : analytic) {
    auto loss_at = [&, name = name](const Matrix& probe) {
      Bindings shifted = bindings;
      shifted[name] = probe;
      Graph h;
      Var r = build(h);
      return h.forward(r, shifted)(0, 0);
    };
    const Matrix numeric = finite_difference_gradient(loss_at, bindings.at(name), eps);
    const double scale = std::max({a.norm(), numeric.norm(), 1e-8});
    worst = std::max(worst, (a - numeric).norm() / scale);
  }
  return worst;
}

double relu_kink_margin(const Graph& g) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t id = 0; id < g.size(); ++id) {
    const Var v(const_cast<Graph*>(&g), id);
    if (g.op(v) != Op::relu) continue;
    const Matrix& x = g.value(Var(const_cast<Graph*>(&g), g.parents(v).front()));
    margin = std::min(margin, x.cwiseAbs().minCoeff());
  }
  return margin;
}

void randomize(Bindings& params, Rng& rng, double lo, double hi) {
  for (auto& [name, m] : params) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  }
}

}  // namespace pawfuse::testing
