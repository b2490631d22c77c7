#include "pawfuse/dedup.hpp"

#include "pawfuse/errors.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace pawfuse {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::vector<DuplicateGroup> find_duplicates(std::span<const HashedImage> images, int threshold) {
  if (threshold < 0 || threshold > 64) throw ContractError("find_duplicates: threshold outside [0, 64]");
  DisjointSets sets(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t j = i + 1; j < images.size(); ++j) {
      if (hamming_distance(images[i].hash, images[j].hash) <= threshold) sets.unite(i, j);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < images.size(); ++i) by_root[sets.find(i)].push_back(i);

  std::vector<DuplicateGroup> groups;
  for (auto& [root, members] : by_root) {
    if (members.size() < 2) continue;
    DuplicateGroup g;
    g.members = members;
    std::optional<int> lo;
    std::optional<int> hi;
    for (std::size_t a = 0; a < members.size(); ++a) {
      const auto& img = images[members[a]];
      g.ids.push_back(img.id);
      if (img.pawpularity) {
        lo = lo ? std::min(*lo, *img.pawpularity) : *img.pawpularity;
        hi = hi ? std::max(*hi, *img.pawpularity) : *img.pawpularity;
      }
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        g.max_distance = std::max(g.max_distance, hamming_distance(img.hash, images[members[b]].hash));
      }
    }
    if (lo) g.label_spread = *hi - *lo;
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace pawfuse
