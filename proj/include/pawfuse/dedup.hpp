#pragma once

#include "pawfuse/phash.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pawfuse {

struct HashedImage {
  std::string id;
  PerceptualHash hash;
  std::optional<int> pawpularity;
};

struct DuplicateGroup {
  std::vector<std::string> ids;         // input order
  std::vector<std::size_t> members;     // indices into the input
  int max_distance = 0;                 // over all member pairs
  std::optional<int> label_spread;      // max - min pawpularity of labeled members
};

/// Single-linkage groups (size >= 2) of the graph whose edges join images at
/// Hamming distance <= threshold. Groups are ordered by their first member.
/// Nothing is removed; this only reports.
std::vector<DuplicateGroup> find_duplicates(std::span<const HashedImage> images, int threshold);

}  // namespace pawfuse
