#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qpinn/config.hpp"
#include "qpinn/errors.hpp"

using namespace qpinn;
using namespace qpinn::cli;
using std::numbers::pi;

namespace {

std::string error_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Kappa, Forms) {
  EXPECT_DOUBLE_EQ(parse_kappa("0.01/pi"), 0.01 / pi);
  EXPECT_DOUBLE_EQ(parse_kappa("2/pi"), 2.0 / pi);
  EXPECT_DOUBLE_EQ(parse_kappa("pi"), pi);
  EXPECT_DOUBLE_EQ(parse_kappa("3*pi"), 3.0 * pi);
  EXPECT_DOUBLE_EQ(parse_kappa(" 0.5 "), 0.5);
  for (const char* bad : {"", "-1", "0", "1/0", "pi/", "abc", "1e400"}) {
    EXPECT_THROW(parse_kappa(bad), ConfigError) << bad;
  }
}

TEST(Defaults, OneDimensional) {
  const auto c = parse_config("{}");
  EXPECT_EQ(c.problem.dim, 1u);
  EXPECT_EQ(c.kappa_text, "0.01/pi");
  EXPECT_DOUBLE_EQ(c.problem.kappa, 0.01 / pi);
  EXPECT_EQ(c.model.kind, train::ModelKind::FnnTeQpinn);
  EXPECT_EQ(c.model.n_qubits, 4u);
  EXPECT_EQ(c.model.n_layers, 5u);
  EXPECT_EQ(c.training.epochs, 150u);
  EXPECT_EQ(c.training.seed, 7u);
  EXPECT_EQ(c.training.lbfgs.history, 10u);
  EXPECT_EQ(c.oracle.nx, 201u);
  EXPECT_EQ(c.oracle.output_times, (std::vector<double>{0.25, 0.5, 1.0}));
  EXPECT_EQ(c.output.eval_times.size(), 101u);
  const double x = 0.3;
  EXPECT_NEAR(c.problem.initial_value(std::span(&x, 1)), -std::sin(pi * x), 1e-15);
}

TEST(Defaults, TwoDimensional) {
  const auto c = parse_config(R"({"problem": {"dim": 2}})");
  EXPECT_DOUBLE_EQ(c.problem.kappa, 2.0 / pi);
  EXPECT_EQ(c.problem.t_max, 0.1);
  EXPECT_EQ(c.nx, 50u);
  EXPECT_EQ(c.nt, 50u);
  EXPECT_EQ(c.oracle.output_times, (std::vector<double>{0.0, 0.039, 0.058, 0.097}));
}

TEST(Parse, OverridesApply) {
  const auto c = parse_config(R"({
    "problem": {"kappa": 0.25, "t_max": 0.5},
    "model": {"kind": "pinn", "pinn_hidden": [8, 8]},
    "collocation": {"nx": 9, "nt": 7},
    "training": {"optimizer": "adam", "epochs": 3, "lambda_bc": 2.0, "adam": {"lr": 0.01}},
    "oracle": {"output_times": [0.5]},
    "output": {"directory": "out", "formats": ["csv", "ppm"], "eval_times": [0.0, 0.5]}
  })");
  EXPECT_EQ(c.problem.kappa, 0.25);
  EXPECT_EQ(c.model.kind, train::ModelKind::Pinn);
  EXPECT_EQ(c.model.pinn_hidden, (std::vector<std::size_t>{8, 8}));
  EXPECT_EQ(c.nx, 9u);
  EXPECT_EQ(c.training.optimizer, Optimizer::Adam);
  EXPECT_EQ(c.training.weights.lambda_bc, 2.0);
  EXPECT_EQ(c.training.adam.lr, 0.01);
  EXPECT_EQ(c.output.formats.size(), 2u);
}

TEST(Parse, UnknownKeysNamed) {
  EXPECT_NE(error_of(R"({"problem": {"kapa": 1}})").find("problem: unknown key 'kapa'"), std::string::npos);
  EXPECT_NE(error_of(R"({"extra": 1})").find("unknown key 'extra'"), std::string::npos);
  EXPECT_NE(error_of(R"({"training": {"lbfgs": {"m": 5}}})").find("training.lbfgs"), std::string::npos);
}

TEST(Parse, InvalidValuesRejected) {
  for (const char* text : {
           "[1, 2]",
           "{not json",
           R"({"problem": {"dim": 3}})",
           R"({"problem": {"kappa": "-1"}})",
           R"({"problem": {"bounds": [[1, -1]]}})",
           R"({"model": {"kind": "transformer"}})",
           R"({"model": {"n_qubits": 0}})",
           R"({"collocation": {"nx": 2}})",
           R"({"training": {"epochs": -1}})",
           R"({"training": {"optimizer": "sgd"}})",
           R"({"training": {"lambda_ic": -1}})",
           R"({"oracle": {"output_times": [0.5, 0.25]}})",
           R"({"output": {"eval_times": [2.0]}})",
           R"({"output": {"formats": ["png"]}})",
           R"({"model": {"n_layers": "five"}})",
       }) {
    EXPECT_THROW(parse_config(text), ConfigError) << text;
  }
}

TEST(Parse, CustomFields) {
  // tables are sampled pointwise, so they are allowed for ic and bc but not for the source
  const auto c = parse_config(R"({"problem": {
    "ic": {"kind": "custom-table", "axes": [[-1, 0, 1]], "values": [0, 1, 0]},
    "source": {"kind": "gaussian-bump", "amplitude": 0.5, "center": [0.0], "width": 0.2}
  }})");
  EXPECT_EQ(c.problem.ic.kind, pde::FieldKind::Table);
  EXPECT_EQ(c.problem.source.kind, pde::FieldKind::GaussianBump);
  const double x = 0.5;
  EXPECT_NEAR(c.problem.initial_value(std::span(&x, 1)), 0.5, 1e-15);
  EXPECT_NEAR(c.problem.source_value(std::vector<double>{0.0, 0.2}), 0.5, 1e-15);
  EXPECT_THROW(parse_config(R"({"problem": {"source": {"kind": "custom-table", "axes": [[-1, 1]], "values": [0, 1]}}})"),
               ConfigError);
}

TEST(RoundTrip, ResolvedConfigIsAFixedPoint) {
  for (const char* text : {"{}", R"({"problem": {"dim": 2}, "model": {"kind": "qnn-te-qpinn"}})",
                           R"({"problem": {"kappa": "3*pi", "ic": {"kind": "gaussian-bump", "center": [0.1]}}})"}) {
    const auto json = to_json(parse_config(text));
    EXPECT_EQ(to_json(parse_config(json)), json) << text;
  }
  EXPECT_EQ(to_json(default_config(2)), to_json(parse_config(R"({"problem": {"dim": 2}})")));
}

TEST(ProblemJson, IgnoresNonProblemBlocks) {
  const auto a = parse_config(R"({"model": {"kind": "pinn"}})");
  const auto b = parse_config(R"({"training": {"seed": 3}})");
  const auto c = parse_config(R"({"problem": {"kappa": 1}})");
  EXPECT_EQ(problem_json(a), problem_json(b));
  EXPECT_NE(problem_json(a), problem_json(c));
}
