#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pawfuse {

struct FoldAssignment {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> fold_of;  // sample index -> fold

  std::vector<std::size_t> validation_indices(std::size_t fold) const;
  std::vector<std::size_t> training_indices(std::size_t fold) const;
  std::vector<std::size_t> fold_sizes() const;
};

/// Seeded shuffle, then round-robin: fold sizes differ by at most one.
FoldAssignment kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace pawfuse
