#pragma once

#include "pawfuse/tensor.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>

namespace pawfuse {

/// Pretrained word vectors in the usual text format: `token v1 ... vE` per line.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dimension) : dimension_(dimension) {}

  static EmbeddingTable load(std::istream& in);
  static EmbeddingTable load(const std::filesystem::path& path);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return vectors_.size(); }

  void insert(std::string token, RowVector vector);
  const RowVector* find(std::string_view token) const;

  /// Mean of the vectors of the lowercased whitespace-separated tokens of
  /// `phrase`. Throws VocabularyError naming every missing token.
  RowVector phrase_vector(std::string_view phrase) const;

 private:
  std::size_t dimension_;
  std::unordered_map<std::string, RowVector> vectors_;
};

}  // namespace pawfuse
