#include "qpinn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qpinn/errors.hpp"

namespace qpinn::oracle {

void Rk45Config::validate() const {
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw std::invalid_argument("RK45 tolerances must be > 0");
  if (initial_dt < 0.0 || max_dt < 0.0) throw std::invalid_argument("RK45 step bounds must be >= 0");
  if (!(safety > 0.0 && safety <= 1.0)) throw std::invalid_argument("RK45 safety must be in (0, 1]");
  if (!(min_scale > 0.0 && min_scale < 1.0 && max_scale > 1.0)) {
    throw std::invalid_argument("RK45 step-scale clamp must satisfy 0 < min < 1 < max");
  }
}

bool has_analytic_solution(const pde::HeatProblem& problem) {
  return problem.ic.kind == pde::FieldKind::SineMode && problem.bc.kind == pde::FieldKind::Zero &&
         problem.source.kind == pde::FieldKind::Zero;
}

double analytic_solution(const pde::HeatProblem& problem, std::span<const double> point) {
  if (!has_analytic_solution(problem)) {
    throw std::invalid_argument("no closed form: needs a sine-mode initial field, zero boundary and zero source");
  }
  if (point.size() != problem.num_inputs()) throw std::invalid_argument("point dimension mismatch");
  double rate = 0.0;
  for (std::size_t d = 0; d < problem.dim; ++d) {
    const double k = problem.ic.modes[d] * std::numbers::pi / (problem.space[d].hi - problem.space[d].lo);
    rate += k * k;
  }
  return problem.ic.value(point.first(problem.dim), problem.space) *
         std::exp(-problem.kappa * rate * point.back());
}

std::vector<std::vector<double>> spatial_axes(const pde::HeatProblem& problem, std::size_t nx) {
  std::vector<std::vector<double>> axes;
  for (std::size_t d = 0; d < problem.dim; ++d) {
    axes.push_back(pde::linspace(problem.space[d].lo, problem.space[d].hi, nx));
  }
  return axes;
}

pde::SolutionGrid analytic_grid(const pde::HeatProblem& problem, std::size_t nx,
                                std::span<const double> times) {
  pde::SolutionGrid grid;
  grid.axes = spatial_axes(problem, nx);
  grid.axes.emplace_back(times.begin(), times.end());
  grid.values.resize(grid.num_points());
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    grid.values[i] = analytic_solution(problem, grid.point(i));
  }
  return grid;
}

namespace {

// Index helpers for an nx^dim grid, first axis fastest.
struct Lattice {
  std::size_t dim;
  std::size_t nx;
  std::size_t size;
  std::vector<double> inv_h2;

  Lattice(const pde::HeatProblem& p, std::size_t n) : dim(p.dim), nx(n), size(1) {
    if (n < 3) throw std::invalid_argument("method-of-lines grid needs at least 3 points per dimension");
    for (std::size_t d = 0; d < dim; ++d) {
      size *= nx;
      const double h = (p.space[d].hi - p.space[d].lo) / static_cast<double>(nx - 1);
      inv_h2.push_back(1.0 / (h * h));
    }
  }
  [[nodiscard]] bool boundary(std::size_t flat) const {
    for (std::size_t d = 0; d < dim; ++d, flat /= nx) {
      const std::size_t i = flat % nx;
      if (i == 0 || i == nx - 1) return true;
    }
    return false;
  }
};

void laplacian_rhs(const pde::HeatProblem& problem, const Lattice& lat,
                   std::span<const double> source, std::span<const double> u,
                   std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  std::size_t stride_d[2] = {1, lat.nx};
  for (std::size_t i = 0; i < lat.size; ++i) {
    if (lat.boundary(i)) continue;
    double lap = 0.0;
    for (std::size_t d = 0; d < lat.dim; ++d) {
      const std::size_t s = stride_d[d];
      lap += (u[i - s] - 2.0 * u[i] + u[i + s]) * lat.inv_h2[d];
    }
    out[i] = problem.kappa * lap + source[i];
  }
}

std::vector<double> sample(const pde::HeatProblem& problem, const Lattice& lat,
                           double (pde::HeatProblem::*field)(std::span<const double>) const) {
  const auto axes = spatial_axes(problem, lat.nx);
  std::vector<double> out(lat.size);
  std::vector<double> x(lat.dim);
  for (std::size_t i = 0; i < lat.size; ++i) {
    std::size_t flat = i;
    for (std::size_t d = 0; d < lat.dim; ++d, flat /= lat.nx) x[d] = axes[d][flat % lat.nx];
    out[i] = (problem.*field)(x);
  }
  return out;
}

// Dormand-Prince 4(5) tableau.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
// fifth-order weights minus embedded fourth-order weights
constexpr double kE[7] = {71.0 / 57600,      0.0,          -71.0 / 16695, 71.0 / 1920,
                          -17253.0 / 339200, 22.0 / 525,   -1.0 / 40};

}  // namespace

std::vector<double> mol_rhs(const pde::HeatProblem& problem, std::size_t nx,
                            std::span<const double> values) {
  problem.validate();
  const Lattice lat(problem, nx);
  if (values.size() != lat.size) throw std::invalid_argument("mol_rhs: value count does not match grid");
  const auto source = sample(problem, lat, &pde::HeatProblem::source_value);
  std::vector<double> out(lat.size);
  laplacian_rhs(problem, lat, source, values, out);
  return out;
}

std::vector<std::vector<double>> dopri5(const OdeRhs& f, std::vector<double> y,
                                        double t0, std::span<const double> output_times,
                                        const Rk45Config& cfg, double time_scale,
                                        Rk45Trace* trace) {
  cfg.validate();
  for (std::size_t i = 0; i < output_times.size(); ++i) {
    if (output_times[i] < t0 || (i > 0 && output_times[i] < output_times[i - 1])) {
      throw std::invalid_argument("output times must be sorted and >= t0");
    }
  }
  const std::size_t n = y.size();
  Rk45Trace local;
  Rk45Trace& tr = trace ? *trace : local;
  auto rhs = [&](double t, std::span<const double> yy, std::span<double> dy) {
    f(t, yy, dy);
    ++tr.rhs_evaluations;
  };
  auto scaled_norm = [&](std::span<const double> e, std::span<const double> a,
                         std::span<const double> b) {
    if (n == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(a[i]), std::abs(b[i]));
      s += (e[i] / sc) * (e[i] / sc);
    }
    return std::sqrt(s / static_cast<double>(n));
  };

  std::vector<std::vector<double>> k(7, std::vector<double>(n));
  std::vector<double> tmp(n), y_new(n), err(n);
  double t = t0;
  rhs(t, y, k[0]);

  double h = cfg.initial_dt;
  if (h == 0.0) {
    // Hairer-Norsett-Wanner starting step
    const double d0 = scaled_norm(y, y, y);
    const double d1 = scaled_norm(k[0], y, y);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    if (time_scale > 0.0) h0 = std::min(h0, time_scale);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h0 * k[0][i];
    rhs(t + h0, tmp, k[1]);
    for (std::size_t i = 0; i < n; ++i) err[i] = (k[1][i] - k[0][i]) / h0;
    const double d2 = scaled_norm(err, y, y);
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
    h = std::min(100.0 * h0, h1);
  }
  if (cfg.max_dt > 0.0) h = std::min(h, cfg.max_dt);
  const double h_floor = 1e-14 * time_scale;

  std::vector<std::vector<double>> out;
  for (double t_out : output_times) {
    while (t < t_out) {
      const double remaining = t_out - t;
      const bool truncated = h >= remaining;
      const double step = truncated ? remaining : h;
      if (!truncated && step < h_floor) {
        throw NumericalError("RK45 step underflow at t = " + std::to_string(t));
      }
      for (int s = 1; s < 7; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (int j = 0; j < s; ++j) acc += kA[s][j] * k[j][i];
          tmp[i] = y[i] + step * acc;
        }
        if (s == 6) y_new = tmp;
        rhs(t + kC[s] * step, s == 6 ? y_new : tmp, k[s]);
      }
      for (std::size_t i = 0; i < n; ++i) {
        double e = 0.0;
        for (int j = 0; j < 7; ++j) e += kE[j] * k[j][i];
        err[i] = step * e;
      }
      const double en = scaled_norm(err, y, y_new);
      if (!std::isfinite(en)) throw NumericalError("RK45 produced a non-finite state");
      if (en <= 1.0) {
        t = truncated ? t_out : t + step;
        y.swap(y_new);
        k[0].swap(k[6]);
        tr.accepted_dt.push_back(step);
        tr.accepted_error.push_back(en);
        const double scale = en == 0.0 ? cfg.max_scale
                                       : std::min(cfg.max_scale, cfg.safety * std::pow(en, -0.2));
        // a truncated step does not shrink the proposal for the next one
        h = std::max(h, step * scale);
        if (!truncated) h = step * scale;
      } else {
        ++tr.rejected;
        h = step * std::max(cfg.min_scale, cfg.safety * std::pow(en, -0.2));
        if (h < h_floor) throw NumericalError("RK45 step underflow at t = " + std::to_string(t));
      }
      if (cfg.max_dt > 0.0) h = std::min(h, cfg.max_dt);
    }
    out.push_back(y);
  }
  return out;
}

pde::SolutionGrid rk45_solve(const pde::HeatProblem& problem, std::size_t nx,
                             std::span<const double> output_times, const Rk45Config& config,
                             Rk45Trace* trace) {
  problem.validate();
  config.validate();
  const Lattice lat(problem, nx);
  for (std::size_t i = 0; i < output_times.size(); ++i) {
    if (output_times[i] < 0.0 || output_times[i] > problem.t_max * (1.0 + 1e-12) ||
        (i > 0 && !(output_times[i] > output_times[i - 1]))) {
      throw std::invalid_argument("output times must be increasing within [0, t_max]");
    }
  }
  const auto source = sample(problem, lat, &pde::HeatProblem::source_value);
  auto full = sample(problem, lat, &pde::HeatProblem::initial_value);
  const auto bvals = sample(problem, lat, &pde::HeatProblem::boundary_value);

  std::vector<std::size_t> interior;
  for (std::size_t i = 0; i < lat.size; ++i) {
    if (lat.boundary(i)) {
      full[i] = bvals[i];
    } else {
      interior.push_back(i);
    }
  }
  std::vector<double> y0(interior.size());
  for (std::size_t j = 0; j < interior.size(); ++j) y0[j] = full[interior[j]];

  // the initial snapshot keeps the initial field on the boundary too
  const auto initial_full = sample(problem, lat, &pde::HeatProblem::initial_value);

  std::vector<double> work = full, dwork(lat.size);
  OdeRhs f = [&](double, std::span<const double> y, std::span<double> dy) {
    for (std::size_t j = 0; j < interior.size(); ++j) work[interior[j]] = y[j];
    laplacian_rhs(problem, lat, source, work, dwork);
    for (std::size_t j = 0; j < interior.size(); ++j) dy[j] = dwork[interior[j]];
  };
  const auto states = dopri5(f, y0, 0.0, output_times, config, problem.t_max, trace);

  pde::SolutionGrid grid;
  grid.axes = spatial_axes(problem, nx);
  grid.axes.emplace_back(output_times.begin(), output_times.end());
  grid.values.reserve(grid.num_points());
  for (std::size_t s = 0; s < states.size(); ++s) {
    std::vector<double> snap = output_times[s] == 0.0 ? initial_full : full;
    for (std::size_t j = 0; j < interior.size(); ++j) snap[interior[j]] = states[s][j];
    grid.values.insert(grid.values.end(), snap.begin(), snap.end());
  }
  return grid;
}

}  // namespace qpinn::oracle
