#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qpinn/loss.hpp"
#include "qpinn/model.hpp"
#include "qpinn/pde.hpp"

namespace qpinn::train {

struct Metrics {
  double l2_rel = 0.0;
  double linf_rel = 0.0;
  pde::SolutionGrid abs_error;
  LossBreakdown losses;
};

struct ErrorNorms {
  double l2_rel = 0.0;
  double linf_rel = 0.0;
};

/// ||p - r||_2 / ||r||_2 and max|p - r| / max|r|. A zero reference makes the
/// ratio infinite unless the prediction matches exactly.
ErrorNorms error_norms(std::span<const double> predicted, std::span<const double> reference);

/// Model output at `coords` (points of `model.inputs().size()` coordinates,
/// stored flat).
std::vector<double> predict(const Model& model, std::span<const double> params,
                            std::span<const double> coords);

/// Model output on every point of a grid whose axes match the model inputs.
pde::SolutionGrid predict_grid(const Model& model, std::span<const double> params,
                               const std::vector<std::vector<double>>& axes);

/// Compares the model against `reference`. Throws std::invalid_argument when
/// a reference axis leaves the problem domain.
Metrics evaluate(const Model& model, std::span<const double> params,
                 const pde::SolutionGrid& reference, const pde::HeatProblem& problem,
                 const LossBreakdown& losses = {});

}  // namespace qpinn::train
