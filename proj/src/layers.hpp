#pragma once

// Helpers shared by the two model implementations.

#include "pawfuse/adam.hpp"
#include "pawfuse/graph.hpp"
#include "pawfuse/records.hpp"
#include "pawfuse/rng.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <string>
#include <string_view>
#include <vector>

namespace pawfuse::detail {

inline std::string layer_name(std::string_view block, std::size_t k, char part) {
  return fmt::format("{}.{}.{}", block, k, part);
}

inline Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double limit, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

/// in, hidden..., out
inline std::vector<std::size_t> stack_widths(std::size_t in, const std::vector<std::size_t>& hidden,
                                             std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

/// He-uniform weights and zero biases for each layer of a stack. The last
/// layer of a regression head gets Glorot scaling instead.
inline void init_stack(ParameterSet& weights, const std::string& block,
                       const std::vector<std::size_t>& widths, bool glorot_last, Rng& rng) {
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const auto fan_in = static_cast<Eigen::Index>(widths[k]);
    const auto fan_out = static_cast<Eigen::Index>(widths[k + 1]);
    const bool last = k + 2 == widths.size();
    const double limit = glorot_last && last
                             ? std::sqrt(6.0 / static_cast<double>(fan_in + fan_out))
                             : std::sqrt(6.0 / static_cast<double>(fan_in));
    weights[layer_name(block, k, 'w')] = uniform_matrix(fan_in, fan_out, limit, rng);
    weights[layer_name(block, k, 'b')] = Matrix::Zero(1, fan_out);
  }
}

inline Var dense(Graph& g, Var x, const std::string& block, std::size_t k) {
  return add(matmul(x, g.parameter(layer_name(block, k, 'w'))),
             g.parameter(layer_name(block, k, 'b')));
}

inline RowVector dense(const RowVector& x, const ParameterSet& w, const std::string& block,
                       std::size_t k) {
  return x * w.at(layer_name(block, k, 'w')) + w.at(layer_name(block, k, 'b'));
}

inline std::string join_widths(const std::vector<std::size_t>& v) {
  return v.empty() ? std::string("none") : fmt::format("{}", fmt::join(v, ","));
}

inline std::vector<std::size_t> parse_widths(const std::string& s) {
  std::vector<std::size_t> out;
  if (s == "none") return out;
  for (const auto& part : split(s, ',')) out.push_back(std::stoul(part));
  return out;
}

}  // namespace pawfuse::detail
