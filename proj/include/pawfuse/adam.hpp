#pragma once

#include "pawfuse/graph.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace pawfuse {

/// Trainable weights by name. Same layout as Bindings so a parameter set can
/// seed a forward pass directly.
using ParameterSet = Bindings;

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// One bias-corrected update of every parameter that has a gradient.
  void step(ParameterSet& params, const Gradients& grads);

  std::int64_t steps() const { return t_; }

 private:
  AdamOptions options_;
  std::map<std::string, Matrix, std::less<>> m_;
  std::map<std::string, Matrix, std::less<>> v_;
  std::int64_t t_ = 0;
};

}  // namespace pawfuse
