#include "qpinn/loss.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace qpinn::train {

using expr::Node;

void LossWeights::validate() const {
  if (!(lambda_bc >= 0.0) || !(lambda_ic >= 0.0)) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

std::string to_string(Reduction r) { return r == Reduction::Sum ? "sum" : "mean"; }

Reduction reduction_from_string(const std::string& s) {
  if (s == "sum") return Reduction::Sum;
  if (s == "mean") return Reduction::Mean;
  throw std::invalid_argument("unknown reduction '" + s + "' (expected sum|mean)");
}

double pairwise_sum(std::span<const double> parts) {
  if (parts.empty()) return 0.0;
  if (parts.size() == 1) return parts[0];
  const std::size_t half = parts.size() / 2;
  return pairwise_sum(parts.first(half)) + pairwise_sum(parts.subspan(half));
}

namespace {

void check_nonempty(const pde::CollocationSet& c) {
  if (c.interior.empty() && c.boundary.empty() && c.initial.empty()) {
    throw std::invalid_argument("collocation set is empty");
  }
}

}  // namespace

Node total_loss(const Model& model, const pde::CollocationSet& collocation,
                const pde::HeatProblem& problem, LossWeights weights, Reduction reduction) {
  weights.validate();
  check_nonempty(collocation);
  expr::Graph& g = model.graph();
  const auto inputs = model.inputs();
  const Node u = model.output();

  auto mean_scale = [&](std::size_t n) {
    return reduction == Reduction::Mean && n > 0 ? 1.0 / static_cast<double>(n) : 1.0;
  };

  Node l_pde = g.zero();
  if (!collocation.interior.empty()) {
    const Node r = pde::residual_pde(u, inputs, problem);
    for (std::size_t i = 0; i < collocation.interior.size(); ++i) {
      l_pde = l_pde + pow(pde::at_point(r, inputs, collocation.interior.point(i)), 2);
    }
  }
  Node l_bc = g.zero();
  for (std::size_t i = 0; i < collocation.boundary.size(); ++i) {
    l_bc = l_bc + pow(pde::residual_bc(u, inputs, problem, collocation.boundary.point(i)), 2);
  }
  Node l_ic = g.zero();
  for (std::size_t i = 0; i < collocation.initial.size(); ++i) {
    l_ic = l_ic + pow(pde::residual_ic(u, inputs, problem, collocation.initial.point(i)), 2);
  }
  return l_pde * mean_scale(collocation.interior.size()) +
         l_bc * (weights.lambda_bc * mean_scale(collocation.boundary.size())) +
         l_ic * (weights.lambda_ic * mean_scale(collocation.initial.size()));
}

struct LossEvaluator::Job {
  int set = 0;
  std::size_t begin = 0;
  std::size_t count = 0;
};

struct LossEvaluator::JobResult {
  double loss = 0.0;
  std::vector<double> grad;  // per parameter, weighted
  std::vector<double> residuals;
};

LossEvaluator::LossEvaluator(const Model& model, const pde::HeatProblem& problem,
                             const pde::CollocationSet& collocation, LossWeights weights,
                             Reduction reduction, EvalOptions options)
    : model_(model), weights_(weights), reduction_(reduction), options_(options) {
  weights.validate();
  problem.validate();
  check_nonempty(collocation);
  if (options_.batch == 0) throw std::invalid_argument("batch size must be positive");
  if (options_.threads == 0) options_.threads = 1;

  expr::Graph& g = model.graph();
  const auto inputs = model.inputs();
  if (inputs.size() != problem.num_inputs()) {
    throw std::invalid_argument("model inputs do not match the problem dimension");
  }
  if (!collocation.interior.empty()) {
    pde_tape_ = std::make_unique<expr::Tape>(
        g, std::vector<Node>{pde::residual_pde(model.output(), inputs, problem)});
  }
  u_tape_ = std::make_unique<expr::Tape>(g, std::vector<Node>{model.output()});
  num_vars_ = g.num_variables();
  for (Node v : inputs) input_vars_.push_back(g.variable_id(v.id()));
  for (const auto& p : model.parameters()) param_vars_.push_back(g.variable_id(p.variable.id()));

  const pde::PointSet* sets[3] = {&collocation.interior, &collocation.boundary, &collocation.initial};
  for (int s = 0; s < 3; ++s) {
    const auto& ps = *sets[s];
    counts_[s] = ps.size();
    coords_[s].assign(ps.coords().begin(), ps.coords().end());
    targets_[s].assign(ps.size(), 0.0);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const auto point = ps.point(i);
      const auto x = point.first(problem.dim);
      if (s == 1) {
        if (!problem.on_boundary(point)) throw std::invalid_argument("boundary point off the boundary");
        targets_[s][i] = problem.boundary_value(x);
      } else if (s == 2) {
        if (point.back() != 0.0) throw std::invalid_argument("initial point with t != 0");
        targets_[s][i] = problem.initial_value(x);
      }
    }
    for (std::size_t b = 0; b < ps.size(); b += options_.batch) {
      jobs_.push_back({s, b, std::min(options_.batch, ps.size() - b)});
    }
  }
}

LossEvaluator::~LossEvaluator() = default;

void LossEvaluator::run_job(const Job& job, expr::Tape::Workspace& ws,
                            std::span<const double> shared, bool with_grad,
                            JobResult& out) const {
  const expr::Tape& tape = job.set == 0 ? *pde_tape_ : *u_tape_;
  const std::size_t dims = input_vars_.size();
  const std::span<const double> lane_values(coords_[job.set].data() + job.begin * dims,
                                            job.count * dims);
  tape.forward(ws, shared, input_vars_, lane_values, job.count, with_grad);

  const double weight = job.set == 0 ? 1.0 : job.set == 1 ? weights_.lambda_bc : weights_.lambda_ic;
  const double scale =
      reduction_ == Reduction::Mean ? 1.0 / static_cast<double>(counts_[job.set]) : 1.0;

  out.residuals.resize(job.count);
  std::vector<double> seeds(job.count);
  double loss = 0.0;
  for (std::size_t l = 0; l < job.count; ++l) {
    const double r = tape.value(ws, 0, l) - targets_[job.set][job.begin + l];
    out.residuals[l] = r;
    loss += r * r;
    seeds[l] = 2.0 * weight * scale * r;
  }
  out.loss = loss;
  if (with_grad) {
    std::vector<double> var_grad(num_vars_, 0.0);
    tape.reverse(ws, seeds, var_grad);
    out.grad.resize(param_vars_.size());
    for (std::size_t i = 0; i < param_vars_.size(); ++i) out.grad[i] = var_grad[param_vars_[i]];
  }
}

LossBreakdown LossEvaluator::run(std::span<const double> params, std::span<double> grad) const {
  if (params.size() != param_vars_.size()) {
    throw std::invalid_argument("parameter vector has wrong length");
  }
  const bool with_grad = !grad.empty();
  if (with_grad && grad.size() != params.size()) {
    throw std::invalid_argument("gradient buffer has wrong length");
  }
  std::vector<double> shared(num_vars_, 0.0);
  for (std::size_t i = 0; i < param_vars_.size(); ++i) shared[param_vars_[i]] = params[i];

  std::vector<JobResult> results(jobs_.size());
  const std::size_t workers = std::min(options_.threads, jobs_.size());
  if (workspaces_.size() < std::max<std::size_t>(workers, 1)) workspaces_.resize(std::max<std::size_t>(workers, 1));
  if (workers <= 1) {
    expr::Tape::Workspace& ws = workspaces_[0];
    for (std::size_t j = 0; j < jobs_.size(); ++j) run_job(jobs_[j], ws, shared, with_grad, results[j]);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        expr::Tape::Workspace& ws = workspaces_[w];
        for (std::size_t j = next++; j < jobs_.size(); j = next++) {
          try {
            run_job(jobs_[j], ws, shared, with_grad, results[j]);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  LossBreakdown out;
  double* parts[3] = {&out.pde, &out.bc, &out.ic};
  for (int s = 0; s < 3; ++s) {
    std::vector<double> losses;
    for (std::size_t j = 0; j < jobs_.size(); ++j) {
      if (jobs_[j].set == s) losses.push_back(results[j].loss);
    }
    *parts[s] = pairwise_sum(losses);
    if (reduction_ == Reduction::Mean && counts_[s] > 0) *parts[s] /= static_cast<double>(counts_[s]);
  }
  out.total = out.pde + weights_.lambda_bc * out.bc + weights_.lambda_ic * out.ic;

  if (with_grad) {
    // pairwise tree over batch gradients, in batch order
    std::vector<std::vector<double>*> level;
    for (auto& r : results) level.push_back(&r.grad);
    while (level.size() > 1) {
      std::vector<std::vector<double>*> next_level;
      for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
        auto& a = *level[i];
        const auto& b = *level[i + 1];
        for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
        next_level.push_back(level[i]);
      }
      if (level.size() % 2 == 1) next_level.push_back(level.back());
      level = std::move(next_level);
    }
    std::copy(level.front()->begin(), level.front()->end(), grad.begin());
  }
  return out;
}

LossBreakdown LossEvaluator::value(std::span<const double> params) const { return run(params, {}); }

LossBreakdown LossEvaluator::value_and_gradient(std::span<const double> params,
                                                std::span<double> grad) const {
  if (grad.empty() && !params.empty()) throw std::invalid_argument("gradient buffer is empty");
  return run(params, grad);
}

std::vector<double> LossEvaluator::residuals(std::span<const double> params, int set) const {
  if (set < 0 || set > 2) throw std::out_of_range("residual set index");
  if (params.size() != param_vars_.size()) throw std::invalid_argument("parameter vector has wrong length");
  std::vector<double> shared(num_vars_, 0.0);
  for (std::size_t i = 0; i < param_vars_.size(); ++i) shared[param_vars_[i]] = params[i];
  std::vector<double> out;
  if (workspaces_.empty()) workspaces_.resize(1);
  expr::Tape::Workspace& ws = workspaces_[0];
  JobResult r;
  for (const auto& job : jobs_) {
    if (job.set != set) continue;
    run_job(job, ws, shared, false, r);
    out.insert(out.end(), r.residuals.begin(), r.residuals.end());
  }
  return out;
}

}  // namespace qpinn::train
