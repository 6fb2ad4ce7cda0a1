#pragma once

// Heat-equation problems, collocation sampling, and residual graphs.
//
//   u_t - kappa * sum_d u_{x_d x_d} - q = 0   on the interior
//   u - b = 0                                   on the spatial boundary, t > 0
//   u(x, 0) - u0(x) = 0                         at t = 0
//
// Point coordinates are always ordered (x[, y], t).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qpinn/exprgraph.hpp"

namespace qpinn::pde {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

enum class FieldKind { Zero, SineMode, GaussianBump, Table };

std::string to_string(FieldKind kind);
FieldKind field_kind_from_string(const std::string& s);

/// A scalar field over (x[, y], t) described by a tag plus parameters.
///
/// sine-mode:     A * prod_d sin(m_d * pi * (x_d - lo_d) / (hi_d - lo_d))
/// gaussian-bump: A * exp(-|x - c|^2 / (2 w^2))
/// custom-table:  multilinear interpolation of `table_values` over the
///                spatial `table_axes` (time independent)
struct FieldSpec {
  FieldKind kind = FieldKind::Zero;
  double amplitude = 1.0;
  std::vector<int> modes;
  std::vector<double> center;
  double width = 0.1;
  std::vector<std::vector<double>> table_axes;
  std::vector<double> table_values;

  static FieldSpec zero() { return {}; }
  static FieldSpec sine_mode(double amplitude, std::vector<int> modes);

  void validate(std::size_t dim) const;
  [[nodiscard]] double value(std::span<const double> x, std::span<const Interval> bounds) const;
  /// Graph form over the spatial input nodes; not available for tables.
  [[nodiscard]] expr::Node build(std::span<const expr::Node> x,
                                 std::span<const Interval> bounds) const;
};

struct HeatProblem {
  std::size_t dim = 1;
  double kappa = 1.0;
  std::vector<Interval> space;
  double t_max = 1.0;
  FieldSpec ic;
  FieldSpec bc;
  FieldSpec source;

  void validate() const;
  [[nodiscard]] std::size_t num_inputs() const { return dim + 1; }

  [[nodiscard]] double initial_value(std::span<const double> x) const;
  [[nodiscard]] double boundary_value(std::span<const double> x) const;
  [[nodiscard]] double source_value(std::span<const double> x) const;
  /// True when the point's spatial coordinates lie on a face of the box.
  [[nodiscard]] bool on_boundary(std::span<const double> point, double tol = 1e-12) const;
};

/// kappa = 0.01/pi, x in [-1, 1], t in [0, 1], u0 = -sin(pi x), zero Dirichlet.
HeatProblem default_problem_1d();
/// kappa = 2/pi, (x, y) in [0, 1]^2, t in [0, 0.1], u0 = sin(pi x) sin(pi y).
HeatProblem default_problem_2d();

/// Points stored flat, `dims` coordinates each.
class PointSet {
 public:
  explicit PointSet(std::size_t dims = 2) : dims_(dims) {}
  void push(std::span<const double> point);
  [[nodiscard]] std::size_t size() const { return dims_ == 0 ? 0 : coords_.size() / dims_; }
  [[nodiscard]] bool empty() const { return coords_.empty(); }
  [[nodiscard]] std::size_t dims() const { return dims_; }
  [[nodiscard]] std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * dims_, dims_};
  }
  [[nodiscard]] std::span<const double> coords() const { return coords_; }

 private:
  std::size_t dims_;
  std::vector<double> coords_;
};

struct CollocationSet {
  PointSet interior;
  PointSet boundary;
  PointSet initial;
};

/// Uniform tensor grid with nx points per spatial dimension and nt time
/// levels (t = 0 included). Initial = all spatial points at t = 0; boundary
/// = spatial perimeter at t > 0; interior = strictly inside at t > 0.
CollocationSet sample_collocation(const HeatProblem& problem, std::size_t nx, std::size_t nt);

std::vector<double> linspace(double lo, double hi, std::size_t n);

/// u_t - kappa * laplacian(u) - q as a graph over the input variables.
expr::Node residual_pde(expr::Node u, std::span<const expr::Node> inputs,
                        const HeatProblem& problem);
/// u(point) - b(point); the point must lie on the spatial boundary.
expr::Node residual_bc(expr::Node u, std::span<const expr::Node> inputs,
                       const HeatProblem& problem, std::span<const double> point);
/// u(x, 0) - u0(x); the point must have t == 0.
expr::Node residual_ic(expr::Node u, std::span<const expr::Node> inputs,
                       const HeatProblem& problem, std::span<const double> point);

/// Substitutes the input variables of `node` by the constant coordinates.
expr::Node at_point(expr::Node node, std::span<const expr::Node> inputs,
                    std::span<const double> point);

/// A field sampled on a Cartesian grid. Axes are ordered (x[, y], t); values
/// are stored with the first axis varying fastest.
struct SolutionGrid {
  std::vector<std::vector<double>> axes;
  std::vector<double> values;

  void validate() const;
  [[nodiscard]] std::size_t num_points() const;
  [[nodiscard]] std::size_t flat_index(std::span<const std::size_t> idx) const;
  /// Coordinates of the point at flat index i.
  [[nodiscard]] std::vector<double> point(std::size_t i) const;
};

}  // namespace qpinn::pde
