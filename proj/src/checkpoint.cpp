#include "pawfuse/checkpoint.hpp"

#include "pawfuse/errors.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace pawfuse {

const std::string& Checkpoint::config_value(std::string_view key) const {
  for (const auto& [k, v] : config) {
    if (k == key) return v;
  }
  throw SchemaError(fmt::format("checkpoint: missing config key '{}'", key));
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << "pawfuse-checkpoint " << Checkpoint::kVersion << '\n';
  out << "kind " << ckpt.kind << '\n';
  for (const auto& [k, v] : ckpt.config) out << "config " << k << ' ' << v << '\n';
  for (const auto& [name, m] : ckpt.tensors) {
    out << fmt::format("tensor {} {} {}\n", name, m.rows(), m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out << ' ';
        out << fmt::format("{:.17g}", m(r, c));
      }
      out << '\n';
    }
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_checkpoint(out, ckpt);
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  std::string magic;
  int version = 0;
  if (!std::getline(in, line) || !(std::istringstream(line) >> magic >> version) ||
      magic != "pawfuse-checkpoint") {
    throw SchemaError("checkpoint: bad header");
  }
  if (version != Checkpoint::kVersion) {
    throw SchemaError(fmt::format("checkpoint: unsupported version {}", version));
  }
  Checkpoint ckpt;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "kind") {
      ss >> ckpt.kind;
    } else if (tag == "config") {
      std::string key;
      ss >> key;
      std::string value;
      std::getline(ss >> std::ws, value);
      ckpt.config.emplace_back(std::move(key), std::move(value));
    } else if (tag == "tensor") {
      std::string name;
      Eigen::Index rows = 0;
      Eigen::Index cols = 0;
      if (!(ss >> name >> rows >> cols) || rows < 0 || cols < 0) {
        throw SchemaError("checkpoint: bad tensor header");
      }
      Matrix m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          if (!(in >> m(r, c))) throw SchemaError("checkpoint: truncated tensor " + name);
        }
      }
      std::getline(in, line);
      ckpt.tensors.insert_or_assign(std::move(name), std::move(m));
    } else {
      throw SchemaError("checkpoint: unknown record '" + tag + "'");
    }
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace pawfuse
