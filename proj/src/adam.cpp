#include "pawfuse/adam.hpp"

#include "pawfuse/errors.hpp"

#include <cmath>

namespace pawfuse {

void Adam::step(ParameterSet& params, const Gradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("adam: gradient for unknown parameter " + name);
    Matrix& w = it->second;
    auto [mit, fresh] = m_.try_emplace(name, Matrix::Zero(w.rows(), w.cols()));
    auto vit = v_.try_emplace(name, Matrix::Zero(w.rows(), w.cols())).first;
    Matrix& m = mit->second;
    Matrix& v = vit->second;
    m = options_.beta1 * m + (1.0 - options_.beta1) * g;
    v = options_.beta2 * v + (1.0 - options_.beta2) * g.cwiseProduct(g);
    w.array() -= options_.learning_rate * (m.array() / c1) /
                 ((v.array() / c2).sqrt() + options_.epsilon);
  }
}

}  // namespace pawfuse
