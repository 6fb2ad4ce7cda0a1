#include "qpinn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qpinn/tape.hpp"

namespace qpinn::train {

ErrorNorms error_norms(std::span<const double> predicted, std::span<const double> reference) {
  if (predicted.size() != reference.size()) {
    throw std::invalid_argument("error_norms: size mismatch");
  }
  double diff2 = 0.0, ref2 = 0.0, diff_max = 0.0, ref_max = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = std::abs(predicted[i] - reference[i]);
    diff2 += d * d;
    ref2 += reference[i] * reference[i];
    diff_max = std::max(diff_max, d);
    ref_max = std::max(ref_max, std::abs(reference[i]));
  }
  auto ratio = [](double num, double den) {
    if (den > 0.0) return num / den;
    return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  };
  return {ratio(std::sqrt(diff2), std::sqrt(ref2)), ratio(diff_max, ref_max)};
}

std::vector<double> predict(const Model& model, std::span<const double> params,
                            std::span<const double> coords) {
  expr::Graph& g = model.graph();
  const auto inputs = model.inputs();
  const std::size_t dims = inputs.size();
  if (coords.size() % dims != 0) throw std::invalid_argument("predict: ragged coordinates");
  if (params.size() != model.num_parameters()) {
    throw std::invalid_argument("predict: parameter vector has wrong length");
  }
  expr::Tape tape(g, {model.output()}, /*enable_reverse=*/false);
  std::vector<double> shared(g.num_variables(), 0.0);
  const auto model_params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    shared[g.variable_id(model_params[i].variable.id())] = params[i];
  }
  std::vector<expr::VarId> lane_vars;
  for (auto v : inputs) lane_vars.push_back(g.variable_id(v.id()));

  constexpr std::size_t kBatch = 64;
  const std::size_t n = coords.size() / dims;
  std::vector<double> out(n);
  expr::Tape::Workspace ws;
  for (std::size_t b = 0; b < n; b += kBatch) {
    const std::size_t count = std::min(kBatch, n - b);
    tape.forward(ws, shared, lane_vars, coords.subspan(b * dims, count * dims), count, false);
    for (std::size_t l = 0; l < count; ++l) out[b + l] = tape.value(ws, 0, l);
  }
  return out;
}

pde::SolutionGrid predict_grid(const Model& model, std::span<const double> params,
                               const std::vector<std::vector<double>>& axes) {
  pde::SolutionGrid grid;
  grid.axes = axes;
  if (axes.size() != model.inputs().size()) {
    throw std::invalid_argument("predict_grid: axis count does not match model inputs");
  }
  const std::size_t n = grid.num_points();
  std::vector<double> coords;
  coords.reserve(n * axes.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = grid.point(i);
    coords.insert(coords.end(), p.begin(), p.end());
  }
  grid.values = predict(model, params, coords);
  return grid;
}

Metrics evaluate(const Model& model, std::span<const double> params,
                 const pde::SolutionGrid& reference, const pde::HeatProblem& problem,
                 const LossBreakdown& losses) {
  reference.validate();
  if (reference.axes.size() != problem.num_inputs()) {
    throw std::invalid_argument("reference grid dimension does not match the problem");
  }
  constexpr double kTol = 1e-12;
  for (std::size_t d = 0; d < reference.axes.size(); ++d) {
    const double lo = d < problem.dim ? problem.space[d].lo : 0.0;
    const double hi = d < problem.dim ? problem.space[d].hi : problem.t_max;
    const double slack = kTol * std::max(1.0, hi - lo);
    if (reference.axes[d].front() < lo - slack || reference.axes[d].back() > hi + slack) {
      throw std::invalid_argument("reference axis " + std::to_string(d) + " leaves the domain");
    }
  }
  Metrics m;
  const auto pred = predict_grid(model, params, reference.axes);
  const auto norms = error_norms(pred.values, reference.values);
  m.l2_rel = norms.l2_rel;
  m.linf_rel = norms.linf_rel;
  m.abs_error.axes = reference.axes;
  m.abs_error.values.resize(pred.values.size());
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    m.abs_error.values[i] = std::abs(pred.values[i] - reference.values[i]);
  }
  m.losses = losses;
  return m;
}

}  // namespace qpinn::train
