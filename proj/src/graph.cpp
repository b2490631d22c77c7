#include "pawfuse/graph.hpp"

#include "pawfuse/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace pawfuse {
namespace {

constexpr double kBceClamp = 1e-7;

std::string shape(const Matrix& m) { return fmt::format("{}x{}", m.rows(), m.cols()); }

[[noreturn]] void shape_error(Op op, const Matrix& a, const Matrix& b) {
  throw DimensionError(
      fmt::format("{}: incompatible operands {} and {}", op_name(op), shape(a), shape(b)));
}

Graph& same_graph(Var a, Var b) {
  if (a.graph() == nullptr || a.graph() != b.graph()) {
    throw ContractError("graph op: operands belong to different graphs");
  }
  return *a.graph();
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::matmul: return "matmul";
    case Op::transpose: return "transpose";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::relu: return "relu";
    case Op::sigmoid: return "sigmoid";
    case Op::l2norm_rows: return "l2norm_rows";
    case Op::flatten: return "flatten";
    case Op::concat: return "concat";
    case Op::mean: return "mean";
    case Op::sum: return "sum";
    case Op::square: return "square";
    case Op::sqrt: return "sqrt";
    case Op::bce: return "bce";
  }
  return "unknown";
}

const Matrix& Var::value() const { return graph_->value(*this); }
const Matrix& Var::grad() const { return graph_->grad(*this); }

Var Graph::input(std::string name) {
  Node n;
  n.kind = InputKind::placeholder;
  n.name = std::move(name);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::parameter(std::string name) {
  if (auto it = parameter_index_.find(name); it != parameter_index_.end()) {
    return {this, it->second};
  }
  Node n;
  n.kind = InputKind::parameter;
  n.name = name;
  nodes_.push_back(std::move(n));
  parameter_index_.emplace(std::move(name), nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Graph::constant(Matrix value) {
  Node n;
  n.kind = InputKind::constant;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::append(Op op, std::vector<std::size_t> parents) {
  for (std::size_t p : parents) {
    if (p >= nodes_.size()) throw ContractError("graph op: dangling parent reference");
  }
  Node n;
  n.op = op;
  n.parents = std::move(parents);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

const Matrix& Graph::value(Var v) const { return nodes_.at(v.id()).value; }
const Matrix& Graph::grad(Var v) const { return nodes_.at(v.id()).grad; }

const Matrix& Graph::forward(Var root, const Bindings& bindings) {
  if (root.graph() != this) throw ContractError("forward: root belongs to another graph");
  degenerate_ = false;
  for (std::size_t i = 0; i <= root.id(); ++i) evaluate(nodes_[i], bindings);
  evaluated_ = root.id() + 1;
  return nodes_[root.id()].value;
}

void Graph::evaluate(Node& node, const Bindings& bindings) {
  auto in = [&](std::size_t k) -> const Matrix& { return nodes_[node.parents[k]].value; };
  switch (node.op) {
    case Op::input: {
      if (node.kind == InputKind::constant) return;
      auto it = bindings.find(node.name);
      if (it == bindings.end()) {
        throw MissingBindingError(fmt::format("forward: no binding for input '{}'", node.name));
      }
      node.value = it->second;
      return;
    }
    case Op::matmul:
      if (in(0).cols() != in(1).rows()) shape_error(node.op, in(0), in(1));
      node.value.noalias() = in(0) * in(1);
      return;
    case Op::transpose:
      node.value = in(0).transpose();
      return;
    case Op::add:
    case Op::sub: {
      const Matrix& a = in(0);
      const Matrix& b = in(1);
      const double sign = node.op == Op::add ? 1.0 : -1.0;
      if (a.rows() == b.rows() && a.cols() == b.cols()) {
        node.value = a + sign * b;
      } else if (b.rows() == 1 && b.cols() == a.cols()) {
        node.value = a;
        node.value.rowwise() += sign * b.row(0);
      } else {
        shape_error(node.op, a, b);
      }
      return;
    }
    case Op::mul:
      if (in(0).rows() != in(1).rows() || in(0).cols() != in(1).cols()) {
        shape_error(node.op, in(0), in(1));
      }
      node.value = in(0).cwiseProduct(in(1));
      return;
    case Op::relu:
      node.value = in(0).cwiseMax(0.0);
      return;
    case Op::sigmoid:
      node.value = in(0).unaryExpr([](double x) { return stable_sigmoid(x); });
      return;
    case Op::l2norm_rows: {
      const Matrix& a = in(0);
      node.value.resize(a.rows(), a.cols());
      node.aux.resize(a.rows());
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double n = a.row(r).norm();
        if (n < kDegenerateNormFloor) {
          node.value.row(r).setZero();
          node.aux(r) = 0.0;
          degenerate_ = true;
        } else {
          node.value.row(r) = a.row(r) / n;
          node.aux(r) = n;
        }
      }
      return;
    }
    case Op::flatten:
      node.value = in(0).reshaped<Eigen::RowMajor>(1, in(0).size());
      return;
    case Op::concat: {
      Eigen::Index cols = 0;
      const Eigen::Index rows = in(0).rows();
      for (std::size_t k = 0; k < node.parents.size(); ++k) {
        if (in(k).rows() != rows) shape_error(node.op, in(0), in(k));
        cols += in(k).cols();
      }
      node.value.resize(rows, cols);
      Eigen::Index at = 0;
      for (std::size_t k = 0; k < node.parents.size(); ++k) {
        node.value.middleCols(at, in(k).cols()) = in(k);
        at += in(k).cols();
      }
      return;
    }
    case Op::mean:
      if (in(0).size() == 0) throw DimensionError("mean: empty operand");
      node.value = Matrix::Constant(1, 1, in(0).mean());
      return;
    case Op::sum:
      node.value = Matrix::Constant(1, 1, in(0).sum());
      return;
    case Op::square:
      node.value = in(0).array().square().matrix();
      return;
    case Op::sqrt:
      node.value = in(0).array().sqrt().matrix();
      return;
    case Op::bce: {
      const Matrix& p = in(0);
      const Matrix& y = in(1);
      if (p.rows() != y.rows() || p.cols() != y.cols()) shape_error(node.op, p, y);
      if (p.size() == 0) throw DimensionError("bce: empty operand");
      double total = 0.0;
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double q = std::clamp(p.data()[i], kBceClamp, 1.0 - kBceClamp);
        const double t = y.data()[i];
        total -= t * std::log(q) + (1.0 - t) * std::log(1.0 - q);
      }
      node.value = Matrix::Constant(1, 1, total / static_cast<double>(p.size()));
      return;
    }
  }
}

Gradients Graph::backward(Var root) {
  if (root.graph() != this) throw ContractError("backward: root belongs to another graph");
  if (root.id() >= evaluated_) throw ContractError("backward: forward has not reached root");
  const Matrix& out = nodes_[root.id()].value;
  if (out.rows() != 1 || out.cols() != 1) {
    throw ContractError(fmt::format("backward: root must be 1x1, got {}", shape(out)));
  }

  std::vector<char> reachable(root.id() + 1, 0);
  reachable[root.id()] = 1;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    if (!reachable[i]) continue;
    for (std::size_t p : nodes_[i].parents) reachable[p] = 1;
  }
  for (std::size_t i = 0; i <= root.id(); ++i) {
    Node& n = nodes_[i];
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  nodes_[root.id()].grad(0, 0) = 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    if (reachable[i] && nodes_[i].op != Op::input) propagate(nodes_[i]);
  }

  Gradients grads;
  for (const auto& [name, index] : parameter_index_) {
    if (index <= root.id()) {
      grads.emplace(name, nodes_[index].grad);
    } else if (index < evaluated_) {
      grads.emplace(name, Matrix::Zero(nodes_[index].value.rows(), nodes_[index].value.cols()));
    }
  }
  return grads;
}

void Graph::propagate(const Node& node) {
  const Matrix& g = node.grad;
  auto parent = [&](std::size_t k) -> Node& { return nodes_[node.parents[k]]; };
  switch (node.op) {
    case Op::input:
      return;
    case Op::matmul: {
      Node& a = parent(0);
      Node& b = parent(1);
      a.grad.noalias() += g * b.value.transpose();
      b.grad.noalias() += a.value.transpose() * g;
      return;
    }
    case Op::transpose:
      parent(0).grad += g.transpose();
      return;
    case Op::add:
    case Op::sub: {
      const double sign = node.op == Op::add ? 1.0 : -1.0;
      Node& a = parent(0);
      Node& b = parent(1);
      a.grad += g;
      if (b.value.rows() == g.rows()) {
        b.grad += sign * g;
      } else {
        b.grad += sign * g.colwise().sum();
      }
      return;
    }
    case Op::mul: {
      Node& a = parent(0);
      Node& b = parent(1);
      // a and b may be the same node; compute both terms before accumulating.
      Matrix ga = g.cwiseProduct(b.value);
      Matrix gb = g.cwiseProduct(a.value);
      a.grad += ga;
      b.grad += gb;
      return;
    }
    case Op::relu: {
      Node& a = parent(0);
      a.grad += g.cwiseProduct(
          a.value.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; }));
      return;
    }
    case Op::sigmoid: {
      const Matrix& y = node.value;
      parent(0).grad += g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
      return;
    }
    case Op::l2norm_rows: {
      Node& a = parent(0);
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const double n = node.aux(r);
        if (n == 0.0) continue;
        const auto y = node.value.row(r);
        a.grad.row(r) += (g.row(r) - y * y.dot(g.row(r))) / n;
      }
      return;
    }
    case Op::flatten: {
      Node& a = parent(0);
      a.grad += g.reshaped<Eigen::RowMajor>(a.value.rows(), a.value.cols());
      return;
    }
    case Op::concat: {
      Eigen::Index at = 0;
      for (std::size_t k = 0; k < node.parents.size(); ++k) {
        Node& p = parent(k);
        p.grad += g.middleCols(at, p.value.cols());
        at += p.value.cols();
      }
      return;
    }
    case Op::mean: {
      Node& a = parent(0);
      a.grad.array() += g(0, 0) / static_cast<double>(a.value.size());
      return;
    }
    case Op::sum:
      parent(0).grad.array() += g(0, 0);
      return;
    case Op::square: {
      Node& a = parent(0);
      a.grad += 2.0 * g.cwiseProduct(a.value);
      return;
    }
    case Op::sqrt: {
      Node& a = parent(0);
      a.grad.array() +=
          g.array() / (2.0 * node.value.array().max(kDegenerateNormFloor));
      return;
    }
    case Op::bce: {
      Node& p = parent(0);
      Node& y = parent(1);
      const double scale = g(0, 0) / static_cast<double>(p.value.size());
      for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        const double raw = p.value.data()[i];
        const double q = std::clamp(raw, kBceClamp, 1.0 - kBceClamp);
        const double t = y.value.data()[i];
        if (raw == q) p.grad.data()[i] += scale * (q - t) / (q * (1.0 - q));
        y.grad.data()[i] += scale * (std::log(1.0 - q) - std::log(q));
      }
      return;
    }
  }
}

namespace {
Var unary(Op op, Var a) {
  if (a.graph() == nullptr) throw ContractError("graph op: detached operand");
  return a.graph()->append(op, {a.id()});
}
Var binary(Op op, Var a, Var b) { return same_graph(a, b).append(op, {a.id(), b.id()}); }
}  // namespace

Var matmul(Var a, Var b) { return binary(Op::matmul, a, b); }
Var transpose(Var a) { return unary(Op::transpose, a); }
Var add(Var a, Var b) { return binary(Op::add, a, b); }
Var sub(Var a, Var b) { return binary(Op::sub, a, b); }
Var mul(Var a, Var b) { return binary(Op::mul, a, b); }
Var relu(Var a) { return unary(Op::relu, a); }
Var sigmoid(Var a) { return unary(Op::sigmoid, a); }
Var l2norm_rows(Var a) { return unary(Op::l2norm_rows, a); }
Var flatten(Var a) { return unary(Op::flatten, a); }
Var mean(Var a) { return unary(Op::mean, a); }
Var sum(Var a) { return unary(Op::sum, a); }
Var square(Var a) { return unary(Op::square, a); }
Var sqrt(Var a) { return unary(Op::sqrt, a); }
Var bce(Var predictions, Var targets) { return binary(Op::bce, predictions, targets); }

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat: no operands");
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  for (Var v : parts) {
    same_graph(parts.front(), v);
    ids.push_back(v.id());
  }
  return parts.front().graph()->append(Op::concat, std::move(ids));
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

}  // namespace pawfuse
