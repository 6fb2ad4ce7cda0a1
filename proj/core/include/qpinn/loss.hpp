#pragma once

// Composite physics-informed loss
//   L = L_pde + lambda_bc * L_bc + lambda_ic * L_ic,
// each term a sum (or mean) of squared residuals over its collocation set.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qpinn/exprgraph.hpp"
#include "qpinn/model.hpp"
#include "qpinn/pde.hpp"
#include "qpinn/tape.hpp"

namespace qpinn::train {

struct LossWeights {
  double lambda_bc = 1.0;
  double lambda_ic = 1.0;
  void validate() const;
};

enum class Reduction { Sum, Mean };

std::string to_string(Reduction r);
Reduction reduction_from_string(const std::string& s);

struct LossBreakdown {
  double total = 0.0;
  double pde = 0.0;
  double bc = 0.0;
  double ic = 0.0;
};

/// The loss as one literal graph over the model parameters (every point
/// substituted). Meant for small sets and cross-checks; training uses
/// LossEvaluator.
expr::Node total_loss(const Model& model, const pde::CollocationSet& collocation,
                      const pde::HeatProblem& problem, LossWeights weights,
                      Reduction reduction = Reduction::Sum);

struct EvalOptions {
  std::size_t threads = 1;
  /// Points per evaluation batch. Part of the result's identity: the
  /// summation tree follows batch boundaries, never the thread count.
  std::size_t batch = 32;
};

/// Evaluates the loss and its parameter gradient by running residual tapes
/// over fixed batches of collocation points. Batch results are combined by
/// pairwise summation in batch order, so results do not depend on the
/// number of threads. Calls on one evaluator must not overlap.
class LossEvaluator {
 public:
  LossEvaluator(const Model& model, const pde::HeatProblem& problem,
                const pde::CollocationSet& collocation, LossWeights weights,
                Reduction reduction = Reduction::Sum, EvalOptions options = {});
  ~LossEvaluator();
  LossEvaluator(const LossEvaluator&) = delete;
  LossEvaluator& operator=(const LossEvaluator&) = delete;

  [[nodiscard]] std::size_t num_parameters() const { return param_vars_.size(); }
  [[nodiscard]] LossBreakdown value(std::span<const double> params) const;
  LossBreakdown value_and_gradient(std::span<const double> params, std::span<double> grad) const;

  /// Residual values at every point of one set, in set order.
  [[nodiscard]] std::vector<double> residuals(std::span<const double> params, int set) const;

 private:
  struct Job;
  struct JobResult;
  LossBreakdown run(std::span<const double> params, std::span<double> grad) const;
  void run_job(const Job& job, expr::Tape::Workspace& ws, std::span<const double> shared,
               bool with_grad, JobResult& out) const;

  const Model& model_;
  LossWeights weights_;
  Reduction reduction_;
  EvalOptions options_;
  std::unique_ptr<expr::Tape> pde_tape_;
  std::unique_ptr<expr::Tape> u_tape_;
  std::vector<expr::VarId> input_vars_;
  std::vector<expr::VarId> param_vars_;
  std::size_t num_vars_ = 0;
  std::vector<Job> jobs_;
  mutable std::vector<expr::Tape::Workspace> workspaces_;  // one per worker, reused
  // coordinates and targets per set: 0 = interior, 1 = boundary, 2 = initial
  std::vector<double> coords_[3];
  std::vector<double> targets_[3];
  std::size_t counts_[3] = {0, 0, 0};
};

/// Reduces `parts` pairwise in index order.
double pairwise_sum(std::span<const double> parts);

}  // namespace qpinn::train
