#include "pawfuse/kfold.hpp"

#include "pawfuse/errors.hpp"
#include "pawfuse/rng.hpp"

#include <numeric>
#include <span>

namespace pawfuse {

FoldAssignment kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n) throw ContractError("kfold_split: need 2 <= k <= n");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  FoldAssignment out{k, seed, std::vector<std::size_t>(n)};
  for (std::size_t pos = 0; pos < n; ++pos) out.fold_of[order[pos]] = pos % k;
  return out;
}

std::vector<std::size_t> FoldAssignment::validation_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::training_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t f : fold_of) ++sizes[f];
  return sizes;
}

}  // namespace pawfuse
