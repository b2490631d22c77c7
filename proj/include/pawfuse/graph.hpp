#pragma once

#include "pawfuse/tensor.hpp"

#include <cstddef>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pawfuse {

enum class Op {
  input,
  matmul,
  transpose,
  add,
  sub,
  mul,
  relu,
  sigmoid,
  l2norm_rows,
  flatten,
  concat,
  mean,
  sum,
  square,
  sqrt,
  bce,
};

std::string_view op_name(Op op);

/// Named matrices supplied to Graph::forward for `input` and `parameter` nodes.
using Bindings = std::map<std::string, Matrix, std::less<>>;
/// d(root)/d(parameter), keyed by parameter name.
using Gradients = std::map<std::string, Matrix, std::less<>>;

class Graph;

/// Handle to a node owned by a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  const Matrix& grad() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run computational graph over dense row-major matrices.
///
/// Nodes are appended in construction order, which is a topological order, so
/// forward() is a single sweep and backward() the reverse sweep. Inputs come in
/// three kinds: named placeholders, named parameters (the only nodes whose
/// gradients backward() reports) and constants whose value is fixed at
/// construction. Clearing is not supported; build a fresh graph per batch.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  Var input(std::string name);
  /// Declaring the same parameter name twice returns the same node, so every
  /// use contributes to one gradient.
  Var parameter(std::string name);
  Var constant(Matrix value);

  /// Evaluates every node up to and including `root`.
  const Matrix& forward(Var root, const Bindings& bindings);

  /// Reverse sweep from a 1x1 root. Requires a prior forward() through `root`.
  Gradients backward(Var root);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  Op op(Var v) const { return nodes_.at(v.id()).op; }
  const std::vector<std::size_t>& parents(Var v) const { return nodes_.at(v.id()).parents; }

  /// True when the last forward() hit a near-zero row in some l2norm_rows node.
  bool degenerate() const { return degenerate_; }

  Var append(Op op, std::vector<std::size_t> parents);

 private:
  enum class InputKind { none, placeholder, parameter, constant };

  struct Node {
    Op op = Op::input;
    InputKind kind = InputKind::none;
    std::vector<std::size_t> parents;
    std::string name;
    Matrix value;
    Matrix grad;
    // l2norm_rows: per-row norms (0 marks a degenerate row).
    RowVector aux;
  };

  void evaluate(Node& node, const Bindings& bindings);
  void propagate(const Node& node);

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t, std::less<>> parameter_index_;
  std::size_t evaluated_ = 0;
  bool degenerate_ = false;
};

Var matmul(Var a, Var b);
Var transpose(Var a);
/// Elementwise sum. `b` may also be a 1 x cols(a) row broadcast over rows of a.
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise (Hadamard) product.
Var mul(Var a, Var b);
Var relu(Var a);
Var sigmoid(Var a);
Var l2norm_rows(Var a);
/// Row-major reshape to 1 x (rows * cols).
Var flatten(Var a);
/// Horizontal concatenation; all parts share a row count.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var mean(Var a);
Var sum(Var a);
Var square(Var a);
Var sqrt(Var a);
/// Mean binary cross-entropy of predictions (clamped to [1e-7, 1 - 1e-7])
/// against same-shaped targets.
Var bce(Var predictions, Var targets);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

}  // namespace pawfuse
