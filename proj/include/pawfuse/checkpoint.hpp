#pragma once

#include "pawfuse/adam.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace pawfuse {

/// Text checkpoint shared by both models:
///
///   pawfuse-checkpoint 1
///   kind <model kind>
///   config <key> <value>          (zero or more, in insertion order)
///   tensor <name> <rows> <cols>
///   <row 0 values, %.17g, space separated>
///   ...
///
/// Tensors are written in name order; the output is a pure function of the
/// contents, so identical weights give identical bytes.
struct Checkpoint {
  static constexpr int kVersion = 1;

  std::string kind;
  std::vector<std::pair<std::string, std::string>> config;
  ParameterSet tensors;

  const std::string& config_value(std::string_view key) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pawfuse
