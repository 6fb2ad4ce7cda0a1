#include "qpinn/pde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace qpinn::pde {

using expr::Node;

std::string to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::Zero: return "zero";
    case FieldKind::SineMode: return "sine-mode";
    case FieldKind::GaussianBump: return "gaussian-bump";
    case FieldKind::Table: return "custom-table";
  }
  return "?";
}

FieldKind field_kind_from_string(const std::string& s) {
  if (s == "zero") return FieldKind::Zero;
  if (s == "sine-mode") return FieldKind::SineMode;
  if (s == "gaussian-bump") return FieldKind::GaussianBump;
  if (s == "custom-table") return FieldKind::Table;
  throw std::invalid_argument("unknown field type '" + s +
                              "' (expected zero|sine-mode|gaussian-bump|custom-table)");
}

FieldSpec FieldSpec::sine_mode(double amplitude, std::vector<int> modes) {
  FieldSpec f;
  f.kind = FieldKind::SineMode;
  f.amplitude = amplitude;
  f.modes = std::move(modes);
  return f;
}

void FieldSpec::validate(std::size_t dim) const {
  if (!std::isfinite(amplitude)) throw std::invalid_argument("field amplitude must be finite");
  switch (kind) {
    case FieldKind::Zero: break;
    case FieldKind::SineMode:
      if (modes.size() != dim) throw std::invalid_argument("sine-mode needs one mode per dimension");
      break;
    case FieldKind::GaussianBump:
      if (center.size() != dim) throw std::invalid_argument("gaussian-bump center has wrong size");
      if (!(width > 0.0)) throw std::invalid_argument("gaussian-bump width must be positive");
      break;
    case FieldKind::Table: {
      if (table_axes.size() != dim) throw std::invalid_argument("custom-table needs one axis per dimension");
      std::size_t count = 1;
      for (const auto& axis : table_axes) {
        if (axis.size() < 2) throw std::invalid_argument("custom-table axis needs >= 2 points");
        for (std::size_t i = 1; i < axis.size(); ++i) {
          if (!(axis[i] > axis[i - 1])) throw std::invalid_argument("custom-table axis not increasing");
        }
        count *= axis.size();
      }
      if (table_values.size() != count) throw std::invalid_argument("custom-table value count mismatch");
      break;
    }
  }
}

double FieldSpec::value(std::span<const double> x, std::span<const Interval> bounds) const {
  switch (kind) {
    case FieldKind::Zero: return 0.0;
    case FieldKind::SineMode: {
      double v = amplitude;
      for (std::size_t d = 0; d < modes.size(); ++d) {
        const double s = (x[d] - bounds[d].lo) / (bounds[d].hi - bounds[d].lo);
        v *= std::sin(modes[d] * std::numbers::pi * s);
      }
      return v;
    }
    case FieldKind::GaussianBump: {
      double r2 = 0.0;
      for (std::size_t d = 0; d < center.size(); ++d) r2 += (x[d] - center[d]) * (x[d] - center[d]);
      return amplitude * std::exp(-r2 / (2.0 * width * width));
    }
    case FieldKind::Table: {
      // multilinear interpolation, clamped to the table's extent
      const std::size_t dim = table_axes.size();
      std::vector<std::size_t> lo_idx(dim);
      std::vector<double> frac(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        const auto& axis = table_axes[d];
        const double xc = std::clamp(x[d], axis.front(), axis.back());
        auto it = std::upper_bound(axis.begin(), axis.end(), xc);
        std::size_t i = static_cast<std::size_t>(std::distance(axis.begin(), it));
        i = std::clamp<std::size_t>(i, 1, axis.size() - 1) - 1;
        lo_idx[d] = i;
        frac[d] = (xc - axis[i]) / (axis[i + 1] - axis[i]);
      }
      double v = 0.0;
      for (std::size_t corner = 0; corner < (std::size_t{1} << dim); ++corner) {
        double w = 1.0;
        std::size_t flat = 0;
        std::size_t stride = 1;
        for (std::size_t d = 0; d < dim; ++d) {
          const bool up = ((corner >> d) & 1U) != 0;
          w *= up ? frac[d] : 1.0 - frac[d];
          flat += (lo_idx[d] + (up ? 1 : 0)) * stride;
          stride *= table_axes[d].size();
        }
        v += w * table_values[flat];
      }
      return amplitude * v;
    }
  }
  return 0.0;
}

Node FieldSpec::build(std::span<const Node> x, std::span<const Interval> bounds) const {
  expr::Graph& g = *x.front().graph();
  switch (kind) {
    case FieldKind::Zero: return g.zero();
    case FieldKind::SineMode: {
      Node v = g.constant(amplitude);
      for (std::size_t d = 0; d < modes.size(); ++d) {
        const double scale = modes[d] * std::numbers::pi / (bounds[d].hi - bounds[d].lo);
        v = v * sin(x[d] * scale - bounds[d].lo * scale);
      }
      return v;
    }
    case FieldKind::GaussianBump: {
      Node r2 = g.zero();
      for (std::size_t d = 0; d < center.size(); ++d) r2 = r2 + pow(x[d] - center[d], 2);
      return amplitude * exp(r2 * (-1.0 / (2.0 * width * width)));
    }
    case FieldKind::Table: break;
  }
  throw std::invalid_argument("custom-table fields have no graph form");
}

void HeatProblem::validate() const {
  if (dim != 1 && dim != 2) throw std::invalid_argument("problem dim must be 1 or 2");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("kappa must be positive");
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw std::invalid_argument("t_max must be positive");
  if (space.size() != dim) throw std::invalid_argument("need one spatial interval per dimension");
  for (const auto& iv : space) {
    if (!(iv.hi > iv.lo)) throw std::invalid_argument("spatial bounds need hi > lo");
  }
  ic.validate(dim);
  bc.validate(dim);
  source.validate(dim);
  if (source.kind == FieldKind::Table) {
    throw std::invalid_argument("source term cannot be a custom-table");
  }
}

double HeatProblem::initial_value(std::span<const double> x) const { return ic.value(x, space); }
double HeatProblem::boundary_value(std::span<const double> x) const { return bc.value(x, space); }
double HeatProblem::source_value(std::span<const double> x) const { return source.value(x, space); }

bool HeatProblem::on_boundary(std::span<const double> point, double tol) const {
  for (std::size_t d = 0; d < dim; ++d) {
    if (std::abs(point[d] - space[d].lo) <= tol || std::abs(point[d] - space[d].hi) <= tol) {
      return true;
    }
  }
  return false;
}

HeatProblem default_problem_1d() {
  HeatProblem p;
  p.dim = 1;
  p.kappa = 0.01 / std::numbers::pi;
  p.space = {{-1.0, 1.0}};
  p.t_max = 1.0;
  // sin(2 pi (x + 1) / 2) = -sin(pi x)
  p.ic = FieldSpec::sine_mode(1.0, {2});
  return p;
}

HeatProblem default_problem_2d() {
  HeatProblem p;
  p.dim = 2;
  p.kappa = 2.0 / std::numbers::pi;
  p.space = {{0.0, 1.0}, {0.0, 1.0}};
  p.t_max = 0.1;
  p.ic = FieldSpec::sine_mode(1.0, {1, 1});
  return p;
}

void PointSet::push(std::span<const double> point) {
  if (point.size() != dims_) throw std::invalid_argument("PointSet: dimension mismatch");
  coords_.insert(coords_.end(), point.begin(), point.end());
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  out.back() = hi;
  return out;
}

CollocationSet sample_collocation(const HeatProblem& problem, std::size_t nx, std::size_t nt) {
  problem.validate();
  if (nx < 3 || nt < 2) {
    throw std::invalid_argument("collocation grid needs nx >= 3 and nt >= 2");
  }
  const std::size_t dims = problem.num_inputs();
  CollocationSet set{PointSet(dims), PointSet(dims), PointSet(dims)};
  std::vector<std::vector<double>> axes;
  for (const auto& iv : problem.space) axes.push_back(linspace(iv.lo, iv.hi, nx));
  const auto times = linspace(0.0, problem.t_max, nt);

  std::size_t spatial = 1;
  for (std::size_t d = 0; d < problem.dim; ++d) spatial *= nx;
  std::vector<double> point(dims);
  for (std::size_t j = 0; j < nt; ++j) {
    for (std::size_t s = 0; s < spatial; ++s) {
      bool edge = false;
      std::size_t rem = s;
      for (std::size_t d = 0; d < problem.dim; ++d) {
        const std::size_t i = rem % nx;
        rem /= nx;
        point[d] = axes[d][i];
        edge = edge || i == 0 || i == nx - 1;
      }
      point[dims - 1] = times[j];
      if (j == 0) {
        set.initial.push(point);
      } else if (edge) {
        set.boundary.push(point);
      } else {
        set.interior.push(point);
      }
    }
  }
  return set;
}

namespace {

void check_inputs(Node u, std::span<const Node> inputs, const HeatProblem& problem) {
  if (inputs.size() != problem.num_inputs()) {
    throw std::invalid_argument("expected " + std::to_string(problem.num_inputs()) +
                                " input variables (x[, y], t)");
  }
  for (Node v : inputs) {
    if (!v.valid() || v.graph() != u.graph() || v.op() != expr::Op::Variable) {
      throw std::invalid_argument("residual inputs must be variables of the model graph");
    }
  }
}

}  // namespace

Node residual_pde(Node u, std::span<const Node> inputs, const HeatProblem& problem) {
  check_inputs(u, inputs, problem);
  Node u_t = expr::differentiate(u, inputs.back());
  Node laplacian = u.graph()->zero();
  for (std::size_t d = 0; d < problem.dim; ++d) {
    Node u_x = expr::differentiate(u, inputs[d]);
    laplacian = laplacian + expr::differentiate(u_x, inputs[d]);
  }
  Node r = u_t - problem.kappa * laplacian;
  if (problem.source.kind != FieldKind::Zero) {
    r = r - problem.source.build(inputs.first(problem.dim), problem.space);
  }
  return r;
}

Node at_point(Node node, std::span<const Node> inputs, std::span<const double> point) {
  if (point.size() != inputs.size()) throw std::invalid_argument("point dimension mismatch");
  std::unordered_map<expr::VarId, Node> repl;
  expr::Graph& g = *node.graph();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    repl.emplace(g.variable_id(inputs[i].id()), g.constant(point[i]));
  }
  return g.substitute(node, repl);
}

Node residual_bc(Node u, std::span<const Node> inputs, const HeatProblem& problem,
                 std::span<const double> point) {
  check_inputs(u, inputs, problem);
  if (point.size() != problem.num_inputs() || !problem.on_boundary(point)) {
    throw std::invalid_argument("residual_bc: point is not on the spatial boundary");
  }
  return at_point(u, inputs, point) - problem.boundary_value(point.first(problem.dim));
}

Node residual_ic(Node u, std::span<const Node> inputs, const HeatProblem& problem,
                 std::span<const double> point) {
  check_inputs(u, inputs, problem);
  if (point.size() != problem.num_inputs() || point.back() != 0.0) {
    throw std::invalid_argument("residual_ic: point is not at t = 0");
  }
  return at_point(u, inputs, point) - problem.initial_value(point.first(problem.dim));
}

void SolutionGrid::validate() const {
  if (axes.empty()) throw std::invalid_argument("solution grid has no axes");
  for (const auto& axis : axes) {
    if (axis.empty()) throw std::invalid_argument("solution grid axis is empty");
    for (std::size_t i = 1; i < axis.size(); ++i) {
      if (!(axis[i] > axis[i - 1])) throw std::invalid_argument("solution grid axis not increasing");
    }
  }
  if (values.size() != num_points()) {
    throw std::invalid_argument("solution grid value count does not match axes");
  }
}

std::size_t SolutionGrid::num_points() const {
  std::size_t n = 1;
  for (const auto& axis : axes) n *= axis.size();
  return axes.empty() ? 0 : n;
}

std::size_t SolutionGrid::flat_index(std::span<const std::size_t> idx) const {
  std::size_t flat = 0;
  std::size_t stride = 1;
  for (std::size_t d = 0; d < axes.size(); ++d) {
    flat += idx[d] * stride;
    stride *= axes[d].size();
  }
  return flat;
}

std::vector<double> SolutionGrid::point(std::size_t i) const {
  std::vector<double> p(axes.size());
  for (std::size_t d = 0; d < axes.size(); ++d) {
    p[d] = axes[d][i % axes[d].size()];
    i /= axes[d].size();
  }
  return p;
}

}  // namespace qpinn::pde
