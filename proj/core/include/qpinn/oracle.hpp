#pragma once

// Reference solutions of the heat equation: the closed form for separable
// sine-mode problems, and a method-of-lines Dormand-Prince 4(5) solver.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "qpinn/pde.hpp"

namespace qpinn::oracle {

struct Rk45Config {
  double abs_tol = 1e-8;
  double rel_tol = 1e-8;
  double initial_dt = 0.0;  // 0: automatic
  double max_dt = 0.0;      // 0: unlimited
  double safety = 0.9;
  double min_scale = 0.2;
  double max_scale = 5.0;

  void validate() const;
};

/// Per-solve record of the step controller.
struct Rk45Trace {
  std::vector<double> accepted_dt;
  std::vector<double> accepted_error;  // scaled error norm, <= 1 when accepted
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
};

/// True for a sine-mode initial field with zero boundary and zero source.
bool has_analytic_solution(const pde::HeatProblem& problem);

/// A * prod_d sin(m_d pi s_d) * exp(-kappa t sum_d (m_d pi / L_d)^2) at
/// point (x[, y], t). Throws std::invalid_argument for other problems.
double analytic_solution(const pde::HeatProblem& problem, std::span<const double> point);

/// Closed-form values on spatial axes times `times`.
pde::SolutionGrid analytic_grid(const pde::HeatProblem& problem, std::size_t nx,
                                std::span<const double> times);

/// Uniform spatial axes with nx nodes per dimension, boundary included.
std::vector<std::vector<double>> spatial_axes(const pde::HeatProblem& problem, std::size_t nx);

/// du/dt = kappa * (central-difference Laplacian) + q on the full nx^dim grid
/// (first axis fastest). Boundary entries of the result are 0: Dirichlet
/// nodes are held fixed. Throws std::invalid_argument when nx < 3.
std::vector<double> mol_rhs(const pde::HeatProblem& problem, std::size_t nx,
                            std::span<const double> values);

using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dy)>;

/// Integrates y' = f(t, y) from t0 and returns y at every output time.
/// Steps are truncated so that each output time is hit exactly. Throws
/// NumericalError when the step falls below 1e-14 * time_scale.
std::vector<std::vector<double>> dopri5(const OdeRhs& f, std::vector<double> y0, double t0,
                                        std::span<const double> output_times,
                                        const Rk45Config& config, double time_scale,
                                        Rk45Trace* trace = nullptr);

/// Method-of-lines solve on nx nodes per dimension; returns a grid with axes
/// (x[, y], t) where the time axis is `output_times`.
pde::SolutionGrid rk45_solve(const pde::HeatProblem& problem, std::size_t nx,
                             std::span<const double> output_times, const Rk45Config& config = {},
                             Rk45Trace* trace = nullptr);

}  // namespace qpinn::oracle
