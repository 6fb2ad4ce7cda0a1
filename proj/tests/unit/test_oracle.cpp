#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qpinn/errors.hpp"
#include "qpinn/oracle.hpp"
#include "qpinn/pde.hpp"

using namespace qpinn;
using namespace qpinn::oracle;
using std::numbers::pi;

namespace {

double max_abs_diff(const pde::SolutionGrid& a, const pde::SolutionGrid& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

Rk45Config tight() {
  Rk45Config c;
  c.abs_tol = 1e-11;
  c.rel_tol = 1e-11;
  return c;
}

}  // namespace

TEST(ClosedForm, Requirements) {
  auto p = pde::default_problem_1d();
  EXPECT_TRUE(has_analytic_solution(p));
  p.source = pde::FieldSpec::sine_mode(1.0, {1});
  EXPECT_FALSE(has_analytic_solution(p));
  const double pt[] = {0.1, 0.2};
  EXPECT_THROW(analytic_solution(p, pt), std::invalid_argument);
}

TEST(ClosedForm, HigherModeAndShiftedInterval) {
  auto p = pde::default_problem_1d();
  p.space = {{0.0, 2.0}};
  p.ic = pde::FieldSpec::sine_mode(0.5, {3});
  const double pt[] = {0.3, 0.7};
  const double k = 3 * pi / 2.0;
  EXPECT_NEAR(analytic_solution(p, pt), 0.5 * std::sin(k * 0.3) * std::exp(-p.kappa * k * k * 0.7), 1e-15);
}

TEST(MolRhs, LinearFieldIsStationary) {
  const auto p = pde::default_problem_1d();
  const auto x = spatial_axes(p, 11)[0];
  const auto r = mol_rhs(p, 11, x);
  for (double v : r) EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(MolRhs, QuadraticGivesTwoKappa) {
  const auto p = pde::default_problem_1d();
  const auto x = spatial_axes(p, 9)[0];
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) u[i] = x[i] * x[i];
  const auto r = mol_rhs(p, 9, u);
  EXPECT_EQ(r.front(), 0.0);
  EXPECT_EQ(r.back(), 0.0);
  for (std::size_t i = 1; i + 1 < r.size(); ++i) EXPECT_NEAR(r[i], 2.0 * p.kappa, 1e-15);
}

TEST(MolRhs, SineErrorIsSecondOrder) {
  const auto p = pde::default_problem_1d();
  auto err = [&](std::size_t n) {
    const auto x = spatial_axes(p, n)[0];
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = std::sin(pi * x[i]);
    const auto r = mol_rhs(p, n, u);
    double m = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) m = std::max(m, std::abs(r[i] + p.kappa * pi * pi * u[i]));
    return m;
  };
  const double ratio = err(21) / err(41);
  EXPECT_NEAR(ratio, 4.0, 0.1);
  EXPECT_THROW(mol_rhs(p, 2, std::vector<double>{0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(mol_rhs(p, 5, std::vector<double>(4, 0.0)), std::invalid_argument);
}

TEST(MolRhs, TwoDimensionalQuadratic) {
  const auto p = pde::default_problem_2d();
  const std::size_t n = 6;
  const auto ax = spatial_axes(p, n);
  std::vector<double> u;
  for (double y : ax[1])
    for (double x : ax[0]) u.push_back(x * x + 3 * y * y);
  const auto r = mol_rhs(p, n, u);
  // interior node (2, 3), first axis fastest
  EXPECT_NEAR(r[3 * n + 2], p.kappa * 8.0, 1e-13);
  EXPECT_EQ(r[0], 0.0);
}

TEST(Rk45, OneDimensionalDefaultAccuracy) {
  const auto p = pde::default_problem_1d();
  const double times[] = {0.25, 0.5, 1.0};
  Rk45Trace trace;
  const auto num = rk45_solve(p, 201, times, {}, &trace);
  const auto ref = analytic_grid(p, 201, times);
  ASSERT_EQ(num.values.size(), 201u * 3);
  EXPECT_EQ(num.axes[1], std::vector<double>(std::begin(times), std::end(times)));
  EXPECT_LE(max_abs_diff(num, ref), 1e-4);
  EXPECT_GT(trace.rhs_evaluations, 0u);
  ASSERT_FALSE(trace.accepted_error.empty());
  for (double e : trace.accepted_error) EXPECT_LE(e, 1.0);
  EXPECT_EQ(trace.accepted_dt.size(), trace.accepted_error.size());
}

TEST(Rk45, SpatialConvergenceOrderTwo) {
  const auto p = pde::default_problem_1d();
  const double times[] = {1.0};
  std::vector<double> errs;
  for (std::size_t n : {26, 51, 101}) {
    errs.push_back(max_abs_diff(rk45_solve(p, n, times, tight()), analytic_grid(p, n, times)));
  }
  for (std::size_t i = 1; i < errs.size(); ++i) {
    const double order = std::log2(errs[i - 1] / errs[i]);
    EXPECT_NEAR(order, 2.0, 0.25) << errs[i - 1] << " -> " << errs[i];
  }
}

TEST(Rk45, ZeroInitialFieldStaysZero) {
  auto p = pde::default_problem_1d();
  p.ic = pde::FieldSpec::zero();
  const double times[] = {0.5, 1.0};
  for (double v : rk45_solve(p, 31, times).values) EXPECT_EQ(v, 0.0);
}

TEST(Rk45, MaximumDoesNotGrow) {
  for (const auto& p : {pde::default_problem_1d(), pde::default_problem_2d()}) {
    std::vector<double> times;
    for (int k = 0; k <= 5; ++k) times.push_back(p.t_max * k / 5.0);
    const std::size_t n = p.dim == 1 ? 101 : 21;
    const auto g = rk45_solve(p, n, times);
    const std::size_t per = g.values.size() / times.size();
    double prev = 1e300;
    for (std::size_t k = 0; k < times.size(); ++k) {
      double m = 0.0;
      for (std::size_t i = 0; i < per; ++i) m = std::max(m, std::abs(g.values[k * per + i]));
      EXPECT_LE(m, prev + 1e-9);
      prev = m;
    }
  }
}

TEST(Rk45, TwoDimensionalAtFiftyNodes) {
  const auto p = pde::default_problem_2d();
  const double times[] = {0.0, 0.039, 0.058, 0.097};
  const auto num = rk45_solve(p, 50, times);
  ASSERT_EQ(num.values.size(), 50u * 50 * 4);
  // independent reference: product of the two 1D modes, written out here
  double worst = 0.0;
  for (std::size_t i = 0; i < num.values.size(); ++i) {
    const auto pt = num.point(i);
    const double e = std::exp(-2.0 * p.kappa * pi * pi * pt[2]);
    worst = std::max(worst, std::abs(num.values[i] - std::sin(pi * pt[0]) * std::sin(pi * pt[1]) * e));
  }
  EXPECT_LE(worst, 2e-3);
}

TEST(Rk45, OutputTimesValidated) {
  const auto p = pde::default_problem_1d();
  const double unsorted[] = {0.5, 0.25};
  EXPECT_THROW(rk45_solve(p, 11, unsorted), std::invalid_argument);
  const double late[] = {2.0};
  EXPECT_THROW(rk45_solve(p, 11, late), std::invalid_argument);
  Rk45Config bad;
  bad.abs_tol = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Dopri5, ExponentialDecayExact) {
  OdeRhs f = [](double, std::span<const double> y, std::span<double> dy) { dy[0] = -y[0]; };
  const double out[] = {0.5, 2.0};
  const auto y = dopri5(f, {1.0}, 0.0, out, tight(), 1.0);
  EXPECT_NEAR(y[0][0], std::exp(-0.5), 1e-10);
  EXPECT_NEAR(y[1][0], std::exp(-2.0), 1e-10);
}

TEST(Dopri5, BlowUpReportsNumericalError) {
  // y' = y^2 from y(0) = 1 has a pole at t = 1
  OdeRhs f = [](double, std::span<const double> y, std::span<double> dy) { dy[0] = y[0] * y[0]; };
  const double out[] = {2.0};
  EXPECT_THROW(dopri5(f, {1.0}, 0.0, out, {}, 1.0), NumericalError);
}
