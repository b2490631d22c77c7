#include "pawfuse/embedding.hpp"

#include "pawfuse/errors.hpp"
#include "pawfuse/records.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

namespace pawfuse {

EmbeddingTable EmbeddingTable::load(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<EmbeddingTable> table;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (!ss.eof()) throw RowError(fmt::format("embeddings line {}: bad number", line_no), line_no);
    if (values.empty()) {
      throw RowError(fmt::format("embeddings line {}: token without vector", line_no), line_no);
    }
    if (!table) table.emplace(values.size());
    if (values.size() != table->dimension()) {
      throw RowError(fmt::format("embeddings line {}: expected {} values, got {}", line_no,
                                 table->dimension(), values.size()),
                     line_no);
    }
    table->insert(std::move(token),
                  Eigen::Map<const RowVector>(values.data(), static_cast<Eigen::Index>(values.size())));
  }
  if (!table) throw SchemaError("embeddings: file contains no vectors");
  return std::move(*table);
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return load(in);
}

void EmbeddingTable::insert(std::string token, RowVector vector) {
  if (static_cast<std::size_t>(vector.size()) != dimension_) {
    throw ContractError(fmt::format("embedding '{}' has length {}, table dimension is {}", token,
                                    vector.size(), dimension_));
  }
  vectors_.insert_or_assign(std::move(token), std::move(vector));
}

const RowVector* EmbeddingTable::find(std::string_view token) const {
  auto it = vectors_.find(std::string(token));
  return it == vectors_.end() ? nullptr : &it->second;
}

RowVector EmbeddingTable::phrase_vector(std::string_view phrase) const {
  std::istringstream ss{to_lower(phrase)};
  RowVector acc = RowVector::Zero(static_cast<Eigen::Index>(dimension_));
  std::vector<std::string> missing;
  std::size_t n = 0;
  std::string token;
  while (ss >> token) {
    if (const RowVector* v = find(token)) {
      acc += *v;
      ++n;
    } else {
      missing.push_back(token);
    }
  }
  if (!missing.empty()) {
    throw VocabularyError(fmt::format("tokens missing from embedding table: {}",
                                      fmt::join(missing, ", ")),
                          std::move(missing));
  }
  if (n == 0) throw VocabularyError("empty feature phrase", {});
  return acc / static_cast<double>(n);
}

}  // namespace pawfuse
