#pragma once

// Full-batch optimizers over a flat parameter vector: L-BFGS with a
// strong-Wolfe line search, and Adam.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace qpinn::train {

/// Returns f(x) and writes grad f(x) into `grad` (same length as x).
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

enum class Status { Running, Converged, MaxIterations, LineSearchFailed };

std::string to_string(Status s);

/// One accepted step, with the values needed to audit the Wolfe conditions.
struct StepRecord {
  std::size_t epoch = 0;
  double alpha = 0.0;
  double phi0 = 0.0;   // f(x_k)
  double dphi0 = 0.0;  // grad f(x_k) . d_k
  double phi = 0.0;    // f(x_k + alpha d_k)
  double dphi = 0.0;   // grad f(x_k + alpha d_k) . d_k
  std::size_t evaluations = 0;
  bool steepest_fallback = false;
};

struct TrainState {
  std::vector<double> params;
  std::size_t iteration = 0;  // completed epochs
  std::size_t inner_steps = 0;
  std::size_t evaluations = 0;
  double loss = 0.0;
  std::vector<double> grad;
  bool evaluated = false;  // loss/grad correspond to params
  Status status = Status::Running;
  std::string message;

  // L-BFGS curvature pairs, oldest first
  std::deque<std::vector<double>> s_hist;
  std::deque<std::vector<double>> y_hist;
  std::vector<StepRecord> steps;

  // Adam moments
  std::vector<double> m;
  std::vector<double> v;
  std::size_t adam_t = 0;

  explicit TrainState(std::vector<double> p = {}) : params(std::move(p)) {}
};

/// Called with iteration 0 for the starting point, then after every epoch.
using IterationCallback = std::function<void(const TrainState&)>;

/// One epoch is one optimizer step: up to `inner_iterations` quasi-Newton
/// iterations, ending early once the epoch has used `max_evaluations`
/// objective evaluations.
struct LbfgsOptions {
  std::size_t inner_iterations = 20;
  std::size_t max_evaluations = 25;
  std::size_t history = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  std::size_t max_line_search = 25;
  std::size_t max_backtracks = 40;
};

/// Runs up to `max_epochs` L-BFGS epochs, stopping early once
/// ||grad||_2 < tolerance. A failed line search falls back to one steepest
/// descent step with Armijo backtracking; if that fails too the run ends with
/// Status::LineSearchFailed. A non-finite loss at the current iterate throws
/// NumericalError.
TrainState lbfgs_minimize(const Objective& f, TrainState state, std::size_t max_epochs,
                          double tolerance, const LbfgsOptions& options = {},
                          const IterationCallback& callback = {});

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

TrainState adam_minimize(const Objective& f, TrainState state, std::size_t max_iters,
                         const AdamOptions& options = {}, const IterationCallback& callback = {});

/// L-BFGS two-loop recursion: returns -H g for the stored pairs.
std::vector<double> lbfgs_direction(std::span<const double> grad,
                                    const std::deque<std::vector<double>>& s_hist,
                                    const std::deque<std::vector<double>>& y_hist);

/// Minimizer of the cubic through (x1, f1, g1), (x2, f2, g2), clamped to
/// [lo, hi]; falls back to the midpoint when the cubic has no minimum.
double cubic_interpolate(double x1, double f1, double g1, double x2, double f2, double g2,
                         double lo, double hi);

}  // namespace qpinn::train
