#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pawfuse {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (empty input, out-of-range label...).
struct ContractError : Error {
  using Error::Error;
};

// Operand shapes incompatible at a graph op.
struct DimensionError : Error {
  using Error::Error;
};

struct MissingBindingError : Error {
  using Error::Error;
};

struct VocabularyError : Error {
  VocabularyError(const std::string& what, std::vector<std::string> missing)
      : Error(what), missing_tokens(std::move(missing)) {}
  std::vector<std::string> missing_tokens;
};

struct SchemaError : Error {
  using Error::Error;
};

struct RowError : Error {
  RowError(const std::string& what, std::size_t line) : Error(what), line(line) {}
  std::size_t line;
};

struct CollisionError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace pawfuse
