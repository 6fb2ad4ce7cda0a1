#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qpinn/errors.hpp"
#include "qpinn/exprgraph.hpp"
#include "qpinn/tape.hpp"

using namespace qpinn;
using namespace qpinn::expr;

namespace {

double at(Node n, std::initializer_list<std::pair<Node, double>> values) {
  Bindings b;
  for (const auto& [v, x] : values) b.set(v, x);
  return eval(n, b);
}

// Random expression over the given leaves. Every op keeps values bounded so
// finite differences stay well conditioned.
Node random_expr(Graph& g, std::mt19937_64& rng, std::span<const Node> leaves, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 10);
  std::uniform_real_distribution<double> c(-1.5, 1.5);
  switch (pick(rng)) {
    case 0: return leaves[std::uniform_int_distribution<std::size_t>(0, leaves.size() - 1)(rng)];
    case 1: return g.constant(c(rng)) * leaves[rng() % leaves.size()];
    case 2: return random_expr(g, rng, leaves, depth - 1) + random_expr(g, rng, leaves, depth - 1);
    case 3: return random_expr(g, rng, leaves, depth - 1) * random_expr(g, rng, leaves, depth - 1);
    case 4: return sin(random_expr(g, rng, leaves, depth - 1));
    case 5: return cos(random_expr(g, rng, leaves, depth - 1));
    case 6: return tanh(random_expr(g, rng, leaves, depth - 1));
    case 7: return exp(tanh(random_expr(g, rng, leaves, depth - 1)));
    case 8: return -random_expr(g, rng, leaves, depth - 1);
    case 9: return recip(2.5 + sin(random_expr(g, rng, leaves, depth - 1)));
    default: return pow(tanh(random_expr(g, rng, leaves, depth - 1)), 2 + static_cast<int>(rng() % 2));
  }
}

}  // namespace

TEST(Eval, ConstantTimesVariable) {
  Graph g;
  Node x = g.variable("x");
  EXPECT_EQ(at(g.constant(2.0) * x, {{x, 3.0}}), 6.0);
}

TEST(Eval, TanhOfZero) {
  Graph g;
  EXPECT_EQ(eval(g.tanh(g.zero()), Bindings{}), 0.0);
}

TEST(Eval, SineMatchesLibrary) {
  Graph g;
  Node x = g.variable("x");
  EXPECT_NEAR(at(sin(x), {{x, 0.5}}), 0.479425538604203, 1e-15);
}

TEST(Eval, UnboundVariableIsNamed) {
  Graph g;
  Node x = g.variable("speed");
  try {
    (void)eval(x * 2.0, Bindings{});
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("speed"), std::string::npos);
  }
}

TEST(Eval, NonFiniteNamesNode) {
  Graph g;
  Node x = g.variable("x");
  Node bad = recip(x);
  try {
    (void)at(bad, {{x, 0.0}});
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("node " + std::to_string(bad.id())), std::string::npos) << e.what();
  }
}

TEST(Eval, RepeatedEvaluationIsBitIdentical) {
  Graph g;
  Node x = g.variable("x"), y = g.variable("y");
  std::mt19937_64 rng(3);
  const Node leaves[] = {x, y};
  Node e = random_expr(g, rng, leaves, 6);
  const double a = at(e, {{x, 0.3}, {y, -0.8}});
  for (int i = 0; i < 5; ++i) EXPECT_EQ(at(e, {{x, 0.3}, {y, -0.8}}), a);
}

TEST(Differentiate, Square) {
  Graph g;
  Node x = g.variable("x");
  EXPECT_EQ(at(differentiate(x * x, x), {{x, 3.0}}), 6.0);
}

TEST(Differentiate, SecondDerivativeOfSine) {
  Graph g;
  Node x = g.variable("x");
  Node d2 = differentiate(differentiate(sin(x), x), x);
  EXPECT_NEAR(at(d2, {{x, 0.7}}), -std::sin(0.7), 1e-15);
  EXPECT_NEAR(at(d2, {{x, 0.7}}), -0.644217687, 1e-9);
}

TEST(Differentiate, ConstantGivesZeroConstant) {
  Graph g;
  Node x = g.variable("x");
  EXPECT_TRUE(g.is_zero(differentiate(g.constant(5.0), x)));
}

TEST(Differentiate, ThirdOrderMixed) {
  // f = sin(a x)^2: d/da of d2f/dx2 against a hand-derived closed form
  Graph g;
  Node x = g.variable("x"), a = g.variable("a");
  Node f = pow(sin(a * x), 2);
  Node d = differentiate(differentiate(differentiate(f, x), x), a);
  // f_xx = 2 a^2 cos(2 a x); d/da = 4 a cos(2ax) - 4 a^2 x sin(2ax)
  const double av = 0.9, xv = 0.4;
  const double expect = 4 * av * std::cos(2 * av * xv) - 4 * av * av * xv * std::sin(2 * av * xv);
  EXPECT_NEAR(at(d, {{x, xv}, {a, av}}), expect, 1e-12);
}

TEST(Gradient, SumOfProductAndVariable) {
  Graph g;
  Node a = g.variable("a"), b = g.variable("b");
  const Node wrt[] = {a, b};
  auto grad = gradient(a * b + a, wrt);
  ASSERT_EQ(grad.size(), 2u);
  EXPECT_EQ(at(grad[0], {{a, 2.0}, {b, 3.0}}), 4.0);
  EXPECT_EQ(at(grad[1], {{a, 2.0}, {b, 3.0}}), 2.0);
}

TEST(Gradient, OfConstant) {
  Graph g;
  Node a = g.variable("a");
  const Node wrt[] = {a};
  auto grad = gradient(g.one(), wrt);
  ASSERT_EQ(grad.size(), 1u);
  EXPECT_TRUE(g.is_zero(grad[0]));
}

TEST(Gradient, TanhOfProductMatchesFiniteDifference) {
  Graph g;
  Node a = g.variable("a"), b = g.variable("b");
  const Node wrt[] = {a, b};
  auto grad = gradient(tanh(a * b), wrt);
  const double h = 1e-6;
  const double fd = (std::tanh(1 + h) - std::tanh(1 - h)) / (2 * h);
  for (Node d : grad) {
    const double v = at(d, {{a, 1.0}, {b, 1.0}});
    EXPECT_NEAR(v, fd, 1e-8);
    EXPECT_NEAR(v, 0.419974, 1e-6);
  }
}

TEST(Primitive, SquareTwiceDifferentiated) {
  auto sq = register_primitive(
      "square", 1, [](std::span<const double> a) { return a[0] * a[0]; },
      [](std::size_t, std::span<const Node> c) { return 2.0 * c[0]; });
  Graph g;
  Node a = g.variable("a");
  const Node args[] = {a};
  Node f = g.call(sq, args);
  EXPECT_EQ(at(f, {{a, 5.0}}), 25.0);
  EXPECT_EQ(at(differentiate(differentiate(f, a), a), {{a, 5.0}}), 2.0);
}

TEST(Primitive, WrongArityRejected) {
  auto sq = register_primitive(
      "square", 1, [](std::span<const double> a) { return a[0] * a[0]; },
      [](std::size_t, std::span<const Node> c) { return 2.0 * c[0]; });
  Graph g;
  Node a = g.variable("a"), b = g.variable("b");
  const Node args[] = {a, b};
  EXPECT_THROW(g.call(sq, args), std::invalid_argument);
}

TEST(Graph, HashConsingSharesNodes) {
  Graph g;
  Node x = g.variable("x");
  Node a = sin(x) * x;
  const auto n = g.size();
  Node b = sin(x) * x;
  EXPECT_EQ(a, b);
  EXPECT_EQ(g.size(), n);
}

TEST(Graph, ZeroPruning) {
  Graph g;
  Node x = g.variable("x");
  EXPECT_EQ(x + g.zero(), x);
  EXPECT_TRUE(g.is_zero(x * g.zero()));
  EXPECT_EQ(x * g.one(), x);
  EXPECT_TRUE(g.is_constant(g.constant(2.0) * g.constant(3.0), 6.0));
}

TEST(Graph, DuplicateVariableRejected) {
  Graph g;
  (void)g.variable("x");
  EXPECT_THROW((void)g.variable("x"), std::invalid_argument);
}

TEST(Graph, LeavesHaveNoChildrenAndChildrenPrecedeParents) {
  Graph g;
  Node x = g.variable("x");
  Node f = tanh(x * x + 1.0);
  EXPECT_TRUE(g.children(x.id()).empty());
  EXPECT_TRUE(g.children(g.one().id()).empty());
  for (NodeId id : g.reachable(std::span(&f, 1))) {
    for (NodeId c : g.children(id)) EXPECT_LT(c, id);
  }
}

TEST(Graph, DotDumpListsReachableNodes) {
  Graph g;
  Node x = g.variable("x");
  Node f = sin(x);
  const auto dot = g.to_dot(std::span(&f, 1));
  EXPECT_EQ(dot.rfind("digraph", 0), 0u);
  EXPECT_NE(dot.find("sin"), std::string::npos);
}

TEST(Properties, RandomGraphsMatchFiniteDifferences) {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 120; ++trial) {
    Graph g;
    Node x = g.variable("x"), y = g.variable("y");
    const Node leaves[] = {x, y};
    Node f = random_expr(g, rng, leaves, 5);
    const double xv = u(rng), yv = u(rng);
    const double h = 1e-5;
    const double fd = (at(f, {{x, xv + h}, {y, yv}}) - at(f, {{x, xv - h}, {y, yv}})) / (2 * h);
    const double d = at(differentiate(f, x), {{x, xv}, {y, yv}});
    EXPECT_LE(std::abs(d - fd), std::max(1e-9, 1e-6 * std::abs(fd))) << "trial " << trial;
  }
}

TEST(Properties, SchwarzSymmetry) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Graph g;
    Node x = g.variable("x"), y = g.variable("y");
    const Node leaves[] = {x, y};
    Node f = random_expr(g, rng, leaves, 5);
    const double xv = u(rng), yv = u(rng);
    const double xy = at(differentiate(differentiate(f, x), y), {{x, xv}, {y, yv}});
    const double yx = at(differentiate(differentiate(f, y), x), {{x, xv}, {y, yv}});
    EXPECT_NEAR(xy, yx, 1e-8) << "trial " << trial;
  }
}

TEST(Properties, GradientAgreesWithDifferentiate) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Graph g;
    Node x = g.variable("x"), y = g.variable("y");
    const Node leaves[] = {x, y};
    Node f = random_expr(g, rng, leaves, 5);
    const Node wrt[] = {x, y};
    auto grad = gradient(f, wrt);
    const double xv = u(rng), yv = u(rng);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_NEAR(at(grad[i], {{x, xv}, {y, yv}}), at(differentiate(f, wrt[i]), {{x, xv}, {y, yv}}), 1e-12);
    }
  }
}

TEST(Tape, LanesAndReverseMatchSymbolicGradient) {
  Graph g;
  Node x = g.variable("x"), w = g.variable("w");
  Node f = tanh(w * x) * sin(x);
  Tape tape(g, {f});
  const VarId lane_vars[] = {static_cast<VarId>(0)};
  const double xs[] = {0.1, -0.4, 0.9};
  std::vector<double> shared(g.num_variables(), 0.0);
  shared[1] = 0.7;  // w
  Tape::Workspace ws;
  tape.forward(ws, shared, lane_vars, xs, 3, true);
  const double seeds[] = {1.0, 2.0, -1.0};
  std::vector<double> grad(g.num_variables(), 0.0);
  tape.reverse(ws, seeds, grad);

  Node dfdw = differentiate(f, w);
  double expect = 0.0;
  for (int l = 0; l < 3; ++l) {
    EXPECT_NEAR(tape.value(ws, 0, l), at(f, {{x, xs[l]}, {w, 0.7}}), 1e-15);
    expect += seeds[l] * at(dfdw, {{x, xs[l]}, {w, 0.7}});
  }
  EXPECT_NEAR(grad[1], expect, 1e-14);
}
