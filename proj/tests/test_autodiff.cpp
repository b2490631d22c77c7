#include "fixtures.hpp"

#include "pawfuse/adam.hpp"
#include "pawfuse/errors.hpp"
#include "pawfuse/graph.hpp"
#include "pawfuse/rng.hpp"
#include "pawfuse/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

using namespace pawfuse;
using namespace pawfuse::testing;

namespace {

Matrix row(std::initializer_list<double> values) {
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) m(0, i++) = v;
  return m;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

// Values in [-2, 2] at least `margin` away from zero, so relu stays off its kink.
Matrix off_kink_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double margin = 1e-3) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double mag = rng.uniform(margin, 2.0);
    m.data()[i] = rng.bernoulli(0.5) ? mag : -mag;
  }
  return m;
}

}  // namespace

TEST(Forward, MatmulWithIdentityReturnsInput) {
  Graph g;
  Var y = matmul(g.input("x"), g.constant(Matrix::Identity(3, 3)));
  const Matrix out = g.forward(y, {{"x", row({1, 2, 3})}});
  EXPECT_EQ(out, row({1, 2, 3}));
}

TEST(Forward, ReluClampsNegatives) {
  Graph g;
  Var y = relu(g.input("x"));
  EXPECT_EQ(g.forward(y, {{"x", row({-1, 0, 2})}}), row({0, 0, 2}));
}

TEST(Forward, SigmoidOfZeroIsHalf) {
  Graph g;
  Var y = sigmoid(g.input("x"));
  EXPECT_DOUBLE_EQ(g.forward(y, {{"x", row({0})}})(0, 0), 0.5);
}

TEST(Forward, SigmoidStaysFiniteForLargeMagnitudes) {
  Graph g;
  Var y = sigmoid(g.input("x"));
  const Matrix out = g.forward(y, {{"x", row({-800, -40, 40, 800})}});
  EXPECT_TRUE(out.allFinite());
  EXPECT_EQ(out(0, 0), 0.0);
  EXPECT_EQ(out(0, 3), 1.0);
  EXPECT_GT(out(0, 1), 0.0);
}

TEST(Forward, ShapeMismatchNamesTheOp) {
  Graph g;
  Var y = matmul(g.input("a"), g.input("b"));
  try {
    g.forward(y, {{"a", Matrix::Ones(2, 3)}, {"b", Matrix::Ones(2, 3)}});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos) << e.what();
  }
}

TEST(Forward, AddRejectsIncompatibleShapes) {
  Graph g;
  Var y = add(g.input("a"), g.input("b"));
  EXPECT_THROW(g.forward(y, {{"a", Matrix::Ones(2, 3)}, {"b", Matrix::Ones(2, 2)}}), DimensionError);
}

TEST(Forward, UnboundInputRaisesMissingBinding) {
  Graph g;
  Var y = relu(g.input("x"));
  EXPECT_THROW(g.forward(y, {}), MissingBindingError);
}

TEST(Forward, UnboundParameterRaisesMissingBinding) {
  Graph g;
  Var y = matmul(g.input("x"), g.parameter("w"));
  EXPECT_THROW(g.forward(y, {{"x", Matrix::Ones(1, 2)}}), MissingBindingError);
}

TEST(Forward, BiasRowBroadcastsOverRows) {
  Graph g;
  Var y = add(g.input("x"), g.input("b"));
  const Matrix out = g.forward(y, {{"x", Matrix::Zero(3, 2)}, {"b", row({1, -1})}});
  for (int r = 0; r < 3; ++r) {
    EXPECT_EQ(out(r, 0), 1.0);
    EXPECT_EQ(out(r, 1), -1.0);
  }
}

TEST(Forward, FlattenIsRowMajor) {
  Graph g;
  Var y = flatten(g.input("x"));
  Matrix x(2, 2);
  x << 1, 2, 3, 4;
  EXPECT_EQ(g.forward(y, {{"x", x}}), row({1, 2, 3, 4}));
}

TEST(Forward, ConcatJoinsHorizontally) {
  Graph g;
  Var y = concat({g.input("a"), g.input("b")});
  EXPECT_EQ(g.forward(y, {{"a", row({1})}, {"b", row({2, 3})}}), row({1, 2, 3}));
}

TEST(Forward, ConcatRejectsRowCountMismatch) {
  Graph g;
  Var y = concat({g.input("a"), g.input("b")});
  EXPECT_THROW(g.forward(y, {{"a", Matrix::Ones(1, 2)}, {"b", Matrix::Ones(2, 2)}}), DimensionError);
}

TEST(Forward, ReductionsAndPointwiseOps) {
  Graph g;
  Var x = g.input("x");
  Var s = sum(x);
  Var m = mean(x);
  Var q = sum(square(x));
  Var r = sqrt(g.input("p"));
  const Bindings b{{"x", row({1, 2, 3, 6})}, {"p", row({4, 9})}};
  EXPECT_DOUBLE_EQ(g.forward(s, b)(0, 0), 12.0);
  EXPECT_DOUBLE_EQ(g.forward(m, b)(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(g.forward(q, b)(0, 0), 50.0);
  EXPECT_EQ(g.forward(r, b), row({2, 3}));
}

TEST(Forward, TransposeIsInvolution) {
  Rng rng(7);
  const Matrix x = random_matrix(3, 5, rng);
  Graph g;
  Var once = transpose(g.input("x"));
  Var twice = transpose(once);
  EXPECT_EQ(g.forward(once, {{"x", x}}).rows(), 5);
  EXPECT_EQ(g.forward(twice, {{"x", x}}), x);
}

TEST(Forward, MatmulShapeAlgebra) {
  Graph g;
  Var y = matmul(g.input("a"), g.input("b"));
  const Matrix out = g.forward(y, {{"a", Matrix::Ones(4, 3)}, {"b", Matrix::Ones(3, 7)}});
  EXPECT_EQ(out.rows(), 4);
  EXPECT_EQ(out.cols(), 7);
}

TEST(Forward, FlattenPreservesElementCount) {
  Graph g;
  Var y = flatten(g.input("x"));
  const Matrix out = g.forward(y, {{"x", Matrix::Ones(3, 4)}});
  EXPECT_EQ(out.rows(), 1);
  EXPECT_EQ(out.cols(), 12);
}

TEST(Forward, BitIdenticalAcrossRuns) {
  auto run = [] {
    Rng rng(99);
    const Matrix x = random_matrix(4, 6, rng);
    const Matrix w = random_matrix(6, 3, rng);
    Graph g;
    Var y = sigmoid(l2norm_rows(relu(matmul(g.input("x"), g.parameter("w")))));
    return g.forward(y, {{"x", x}, {"w", w}});
  };
  EXPECT_EQ(run(), run());
}

TEST(Backward, SquareGradientIsTwiceX) {
  Graph g;
  Var x = g.parameter("x");
  Var root = sum(square(x));
  g.forward(root, {{"x", row({3})}});
  const Gradients grads = g.backward(root);
  EXPECT_DOUBLE_EQ(grads.at("x")(0, 0), 6.0);
}

TEST(Backward, ReluDeadRegionHasZeroGradient) {
  Graph g;
  Var x = g.parameter("x");
  Var root = sum(relu(x));
  g.forward(root, {{"x", row({-5})}});
  EXPECT_EQ(g.backward(root).at("x")(0, 0), 0.0);
}

TEST(Backward, ReluSubgradientAtZeroIsZero) {
  Graph g;
  Var x = g.parameter("x");
  Var root = sum(relu(x));
  g.forward(root, {{"x", row({0})}});
  EXPECT_EQ(g.backward(root).at("x")(0, 0), 0.0);
}

TEST(Backward, NonScalarRootIsAContractError) {
  Graph g;
  Var x = g.parameter("x");
  Var root = relu(x);
  g.forward(root, {{"x", row({1, 2})}});
  EXPECT_THROW(g.backward(root), ContractError);
}

TEST(Backward, GradientShapesMatchValues) {
  Rng rng(5);
  Graph g;
  Var root = sum(relu(matmul(g.input("x"), g.parameter("w"))));
  g.forward(root, {{"x", random_matrix(3, 4, rng)}, {"w", random_matrix(4, 2, rng)}});
  const Gradients grads = g.backward(root);
  EXPECT_EQ(grads.at("w").rows(), 4);
  EXPECT_EQ(grads.at("w").cols(), 2);
  for (std::size_t id = 0; id < g.size(); ++id) {
    const Var v(&g, id);
    EXPECT_EQ(g.grad(v).rows(), g.value(v).rows());
    EXPECT_EQ(g.grad(v).cols(), g.value(v).cols());
  }
}

TEST(Backward, SharedParameterAccumulatesAdditively) {
  Rng rng(11);
  const Matrix x = random_matrix(2, 3, rng);
  const Matrix w = random_matrix(3, 3, rng);
  const Matrix u = random_matrix(3, 3, rng);

  // w used in two branches of one graph.
  Graph shared;
  Var ws = shared.parameter("w");
  Var xs = shared.input("x");
  Var root = add(sum(square(matmul(xs, ws))), sum(matmul(matmul(xs, ws), shared.constant(u))));
  shared.forward(root, {{"x", x}, {"w", w}});
  const Matrix combined = shared.backward(root).at("w");

  // The same two branches, each with its own copy of w.
  Graph split;
  Var xa = split.input("x");
  Var split_root = add(sum(square(matmul(xa, split.parameter("w1")))),
                       sum(matmul(matmul(xa, split.parameter("w2")), split.constant(u))));
  split.forward(split_root, {{"x", x}, {"w1", w}, {"w2", w}});
  const Gradients parts = split.backward(split_root);

  EXPECT_TRUE(combined.isApprox(parts.at("w1") + parts.at("w2"), 1e-14));
}

TEST(Backward, UnreachableParameterGetsZeroGradient) {
  Graph g;
  Var a = g.parameter("a");
  g.parameter("unused");
  Var root = sum(square(a));
  g.forward(root, {{"a", row({1, 2})}, {"unused", row({5})}});
  const Gradients grads = g.backward(root);
  ASSERT_TRUE(grads.count("unused"));
  EXPECT_EQ(grads.at("unused")(0, 0), 0.0);
}

struct OpCase {
  const char* name;
  std::function<Var(Graph&)> build;
  Bindings bindings;
};

std::vector<OpCase> op_cases() {
  Rng rng(2024);
  std::vector<OpCase> cases;
  auto p = [](Graph& g, const char* n) { return g.parameter(n); };
  cases.push_back({"matmul", [=](Graph& g) { return sum(square(matmul(p(g, "a"), p(g, "b")))); },
                   {{"a", random_matrix(2, 3, rng)}, {"b", random_matrix(3, 4, rng)}}});
  cases.push_back({"transpose", [=](Graph& g) { return sum(mul(transpose(p(g, "a")), p(g, "b"))); },
                   {{"a", random_matrix(2, 3, rng)}, {"b", random_matrix(3, 2, rng)}}});
  cases.push_back({"add-broadcast", [=](Graph& g) { return sum(square(add(p(g, "a"), p(g, "b")))); },
                   {{"a", random_matrix(3, 4, rng)}, {"b", random_matrix(1, 4, rng)}}});
  cases.push_back({"sub-broadcast", [=](Graph& g) { return sum(square(sub(p(g, "a"), p(g, "b")))); },
                   {{"a", random_matrix(3, 4, rng)}, {"b", random_matrix(1, 4, rng)}}});
  cases.push_back({"mul", [=](Graph& g) { return sum(mul(p(g, "a"), p(g, "b"))); },
                   {{"a", random_matrix(2, 3, rng)}, {"b", random_matrix(2, 3, rng)}}});
  cases.push_back({"relu", [=](Graph& g) { return sum(square(relu(p(g, "a")))); }, {{"a", off_kink_matrix(3, 3, rng)}}});
  cases.push_back({"sigmoid", [=](Graph& g) { return sum(sigmoid(p(g, "a"))); }, {{"a", random_matrix(3, 3, rng)}}});
  cases.push_back({"l2norm_rows", [=](Graph& g) { return sum(mul(l2norm_rows(p(g, "a")), p(g, "b"))); },
                   {{"a", random_matrix(3, 4, rng)}, {"b", random_matrix(3, 4, rng)}}});
  cases.push_back({"flatten", [=](Graph& g) { return sum(mul(flatten(p(g, "a")), p(g, "b"))); },
                   {{"a", random_matrix(2, 3, rng)}, {"b", random_matrix(1, 6, rng)}}});
  cases.push_back({"concat", [=](Graph& g) { return sum(square(concat({p(g, "a"), p(g, "b")}))); },
                   {{"a", random_matrix(2, 3, rng)}, {"b", random_matrix(2, 1, rng)}}});
  cases.push_back({"mean", [=](Graph& g) { return mean(square(p(g, "a"))); }, {{"a", random_matrix(3, 2, rng)}}});
  cases.push_back({"sqrt", [=](Graph& g) { return sum(sqrt(p(g, "a"))); }, {{"a", random_matrix(2, 3, rng, 0.5, 2.0)}}});
  cases.push_back({"bce", [=](Graph& g) { return bce(sigmoid(p(g, "a")), g.constant(Matrix::Constant(1, 4, 0.3))); },
                   {{"a", random_matrix(1, 4, rng)}}});
  return cases;
}

TEST(Backward, EveryOpMatchesCentralDifferences) {
  for (const OpCase& c : op_cases()) {
    EXPECT_LT(max_gradient_error(c.build, c.bindings), 1e-5) << c.name;
  }
}

TEST(Backward, ComposedGraphMatchesCentralDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(31, seed));
    const Matrix x = random_matrix(4, 5, rng);
    const Bindings params{{"w1", random_matrix(5, 6, rng)}, {"b1", random_matrix(1, 6, rng)},
                          {"w2", random_matrix(6, 1, rng)}};
    auto build = [x](Graph& g) {
      Var h = l2norm_rows(relu(add(matmul(g.constant(x), g.parameter("w1")), g.parameter("b1"))));
      Var gram = matmul(h, transpose(h));
      Var out = sigmoid(matmul(h, g.parameter("w2")));
      return add(mean(square(out)), mean(flatten(gram)));
    };
    Graph probe;
    probe.forward(build(probe), params);
    if (relu_kink_margin(probe) < 1e-3 || probe.degenerate()) continue;
    EXPECT_LT(max_gradient_error(build, params), 1e-5) << "seed " << seed;
  }
}

TEST(Normalize, ThreeFourFive) {
  const auto out = l2_normalize_rows(row({3, 4}));
  EXPECT_DOUBLE_EQ(out.rows(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(out.rows(0, 1), 0.8);
  EXPECT_FALSE(out.degenerate());
}

TEST(Normalize, AxisVectors) {
  Matrix x(2, 2);
  x << 1, 0, 0, 2;
  EXPECT_EQ(l2_normalize_rows(x).rows, Matrix::Identity(2, 2));
}

TEST(Normalize, RandomRowsHaveUnitNorm) {
  Rng rng(3);
  const Matrix x = random_matrix(5, 8, rng);
  const auto out = l2_normalize_rows(x);
  for (Eigen::Index i = 0; i < 5; ++i) {
    double sq = 0.0;
    for (Eigen::Index j = 0; j < 8; ++j) sq += out.rows(i, j) * out.rows(i, j);
    EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-12);
  }
}

TEST(Normalize, ZeroRowIsFlaggedNotThrown) {
  Matrix x(2, 3);
  x << 0, 0, 0, 1, 2, 2;
  const auto out = l2_normalize_rows(x);
  ASSERT_TRUE(out.degenerate());
  EXPECT_EQ(out.degenerate_rows, std::vector<Eigen::Index>{0});
  EXPECT_EQ(out.rows.row(0).norm(), 0.0);

  Graph g;
  Var y = l2norm_rows(g.input("x"));
  const Matrix gv = g.forward(y, {{"x", x}});
  EXPECT_TRUE(g.degenerate());
  EXPECT_TRUE(gv.allFinite());
}

TEST(Normalize, WorksOnFloatMatrices) {
  Eigen::MatrixXf x(1, 2);
  x << 3.0f, 4.0f;
  EXPECT_FLOAT_EQ(l2_normalize_rows(x).rows(0, 1), 0.8f);
}

TEST(RngTest, SameSeedSameSequence) {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngTest, DefaultSeedMatchesStandardSequence) {
  // The standard fixes the 10000th output of a default-seeded mt19937_64
  // (seed 5489) at 9981545732273789042, which pins the sequence on every platform.
  Rng rng(5489);
  for (int i = 0; i < 9999; ++i) rng.next_u64();
  EXPECT_EQ(rng.next_u64(), 9981545732273789042ULL);
}

TEST(RngTest, BelowStaysInRangeAndUniformIsHalfOpen) {
  Rng rng(8);
  for (int i = 0; i < 10000; ++i) {
    EXPECT_LT(rng.below(7), 7u);
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(AdamTest, MinimizesQuadratic) {
  ParameterSet params{{"x", row({4.0, -3.0})}};
  Adam adam({0.1});
  for (int step = 0; step < 500; ++step) {
    Graph g;
    Var root = sum(square(g.parameter("x")));
    g.forward(root, params);
    adam.step(params, g.backward(root));
  }
  EXPECT_LT(params.at("x").cwiseAbs().maxCoeff(), 1e-2);
  EXPECT_EQ(adam.steps(), 500);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  // With bias correction the first update is lr * g / (|g| + eps) = lr * sign(g).
  ParameterSet params{{"x", row({1.0, -2.0})}};
  Gradients grads{{"x", row({0.5, -3.0})}};
  Adam adam({0.01});
  adam.step(params, grads);
  EXPECT_NEAR(params.at("x")(0, 0), 0.99, 1e-9);
  EXPECT_NEAR(params.at("x")(0, 1), -1.99, 1e-9);
}
