#include "qpinn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "qpinn/errors.hpp"

namespace qpinn::train {

std::string to_string(Status s) {
  switch (s) {
    case Status::Running: return "running";
    case Status::Converged: return "converged";
    case Status::MaxIterations: return "max-iterations";
    case Status::LineSearchFailed: return "line-search-failed";
  }
  return "?";
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// An exactly zero gradient stops the run even with tolerance 0.
bool stationary(std::span<const double> g, double tolerance) {
  const double n = norm2(g);
  return n < tolerance || n == 0.0;
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

void evaluate_current(const Objective& f, TrainState& st) {
  st.grad.assign(st.params.size(), 0.0);
  st.loss = f(st.params, st.grad);
  ++st.evaluations;
  if (!std::isfinite(st.loss) || !all_finite(st.grad)) {
    throw NumericalError("non-finite loss or gradient at iteration " +
                         std::to_string(st.iteration));
  }
  st.evaluated = true;
}

struct Trial {
  double alpha = 0.0;
  double phi = 0.0;
  double dphi = 0.0;
  std::vector<double> x;
  std::vector<double> g;
};

// Evaluation at a trial point; a numerical failure counts as an infinite loss
// so the search shrinks the step.
Trial probe(const Objective& f, std::span<const double> x0, std::span<const double> d,
            double alpha) {
  Trial t;
  t.alpha = alpha;
  t.x.resize(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) t.x[i] = x0[i] + alpha * d[i];
  t.g.assign(x0.size(), 0.0);
  try {
    t.phi = f(t.x, t.g);
  } catch (const NumericalError&) {
    t.phi = std::numeric_limits<double>::infinity();
  }
  if (!std::isfinite(t.phi) || !all_finite(t.g)) {
    t.phi = std::numeric_limits<double>::infinity();
    t.dphi = std::numeric_limits<double>::quiet_NaN();
  } else {
    t.dphi = dot(t.g, d);
  }
  return t;
}

struct SearchResult {
  bool ok = false;
  Trial trial;
  std::size_t evaluations = 0;
};

SearchResult strong_wolfe(const Objective& f, std::span<const double> x0, double phi0,
                          double dphi0, std::span<const double> d, double alpha_init,
                          const LbfgsOptions& opt) {
  SearchResult res;
  auto sufficient = [&](const Trial& t) {
    return std::isfinite(t.phi) && t.phi <= phi0 + opt.c1 * t.alpha * dphi0;
  };
  auto curvature = [&](const Trial& t) { return std::abs(t.dphi) <= -opt.c2 * dphi0; };

  Trial prev;
  prev.alpha = 0.0;
  prev.phi = phi0;
  prev.dphi = dphi0;
  double alpha = alpha_init;
  Trial lo, hi;
  bool bracketed = false;

  while (res.evaluations < opt.max_line_search) {
    Trial cur = probe(f, x0, d, alpha);
    ++res.evaluations;
    if (!sufficient(cur) || (res.evaluations > 1 && cur.phi >= prev.phi)) {
      lo = std::move(prev);
      hi = std::move(cur);
      bracketed = true;
      break;
    }
    if (curvature(cur)) {
      res.ok = true;
      res.trial = std::move(cur);
      return res;
    }
    if (cur.dphi >= 0.0) {
      lo = std::move(cur);
      hi = std::move(prev);
      bracketed = true;
      break;
    }
    const double min_step = cur.alpha + 0.01 * (cur.alpha - prev.alpha);
    const double max_step = cur.alpha * 10.0;
    const double next = cubic_interpolate(prev.alpha, prev.phi, prev.dphi, cur.alpha, cur.phi,
                                          cur.dphi, min_step, max_step);
    prev = std::move(cur);
    alpha = next;
  }
  if (!bracketed) return res;

  // zoom: lo always satisfies sufficient decrease and has the lowest value seen
  while (res.evaluations < opt.max_line_search) {
    const double a_min = std::min(lo.alpha, hi.alpha);
    const double a_max = std::max(lo.alpha, hi.alpha);
    const double width = a_max - a_min;
    if (width <= 1e-16 * std::max(1.0, a_max)) break;
    double a = std::isfinite(hi.phi)
                   ? cubic_interpolate(lo.alpha, lo.phi, lo.dphi, hi.alpha, hi.phi, hi.dphi,
                                       a_min, a_max)
                   : 0.5 * (a_min + a_max);
    // keep the trial away from the interval ends
    const double margin = 0.1 * width;
    if (a - a_min < margin) a = a_min + margin;
    if (a_max - a < margin) a = a_max - margin;

    Trial cur = probe(f, x0, d, a);
    ++res.evaluations;
    if (!sufficient(cur) || cur.phi >= lo.phi) {
      hi = std::move(cur);
      continue;
    }
    if (curvature(cur)) {
      res.ok = true;
      res.trial = std::move(cur);
      return res;
    }
    if (cur.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = std::move(lo);
    lo = std::move(cur);
  }
  return res;
}

// Steepest descent with Armijo backtracking.
SearchResult armijo_backtrack(const Objective& f, std::span<const double> x0, double phi0,
                              std::span<const double> d, double alpha, const LbfgsOptions& opt) {
  SearchResult res;
  const double dphi0 = dot(d, d) * -1.0;
  for (std::size_t k = 0; k < opt.max_backtracks; ++k, alpha *= 0.5) {
    Trial cur = probe(f, x0, d, alpha);
    ++res.evaluations;
    if (std::isfinite(cur.phi) && cur.phi <= phi0 + opt.c1 * alpha * dphi0) {
      res.ok = true;
      res.trial = std::move(cur);
      return res;
    }
  }
  return res;
}

}  // namespace

double cubic_interpolate(double x1, double f1, double g1, double x2, double f2, double g2,
                         double lo, double hi) {
  const double d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
  const double d2_sq = d1 * d1 - g1 * g2;
  if (std::isfinite(d2_sq) && d2_sq >= 0.0) {
    const double d2 = std::sqrt(d2_sq);
    const double pos = x1 <= x2 ? x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
                                : x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2));
    if (std::isfinite(pos)) return std::clamp(pos, lo, hi);
  }
  return 0.5 * (lo + hi);
}

std::vector<double> lbfgs_direction(std::span<const double> grad,
                                    const std::deque<std::vector<double>>& s_hist,
                                    const std::deque<std::vector<double>>& y_hist) {
  std::vector<double> q(grad.begin(), grad.end());
  const std::size_t k = s_hist.size();
  std::vector<double> alpha(k), rho(k);
  for (std::size_t i = k; i-- > 0;) {
    rho[i] = 1.0 / dot(y_hist[i], s_hist[i]);
    alpha[i] = rho[i] * dot(s_hist[i], q);
    for (std::size_t j = 0; j < q.size(); ++j) q[j] -= alpha[i] * y_hist[i][j];
  }
  if (k > 0) {
    const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
    for (auto& v : q) v *= gamma;
  }
  for (std::size_t i = 0; i < k; ++i) {
    const double beta = rho[i] * dot(y_hist[i], q);
    for (std::size_t j = 0; j < q.size(); ++j) q[j] += s_hist[i][j] * (alpha[i] - beta);
  }
  for (auto& v : q) v = -v;
  return q;
}

namespace {

// One quasi-Newton iteration from the current iterate. Returns false when
// both the Wolfe search and the steepest-descent fallback fail.
bool lbfgs_iteration(const Objective& f, TrainState& st, const LbfgsOptions& opt,
                     std::size_t& epoch_evals) {
  std::vector<double> d = lbfgs_direction(st.grad, st.s_hist, st.y_hist);
  double dphi0 = dot(st.grad, d);
  if (!(dphi0 < 0.0)) {
    st.s_hist.clear();
    st.y_hist.clear();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = -st.grad[j];
    dphi0 = dot(st.grad, d);
  }
  double g1 = 0.0;
  for (double v : st.grad) g1 += std::abs(v);
  const double alpha0 = st.inner_steps == 0 ? std::min(1.0, 1.0 / g1) : 1.0;

  SearchResult sr = strong_wolfe(f, st.params, st.loss, dphi0, d, alpha0, opt);
  bool fallback = false;
  if (!sr.ok) {
    st.s_hist.clear();
    st.y_hist.clear();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = -st.grad[j];
    SearchResult bt = armijo_backtrack(f, st.params, st.loss, d, std::min(1.0, 1.0 / g1), opt);
    bt.evaluations += sr.evaluations;
    sr = std::move(bt);
    fallback = true;
    dphi0 = dot(st.grad, d);
    if (sr.ok) sr.trial.dphi = dot(sr.trial.g, d);
  }
  st.evaluations += sr.evaluations;
  epoch_evals += sr.evaluations;
  if (!sr.ok) return false;

  std::vector<double> s(st.params.size()), y(st.params.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    s[j] = sr.trial.x[j] - st.params[j];
    y[j] = sr.trial.g[j] - st.grad[j];
  }
  if (dot(s, y) > 1e-10 * dot(y, y)) {
    st.s_hist.push_back(std::move(s));
    st.y_hist.push_back(std::move(y));
    if (st.s_hist.size() > opt.history) {
      st.s_hist.pop_front();
      st.y_hist.pop_front();
    }
  }
  StepRecord rec;
  rec.epoch = st.iteration + 1;
  rec.alpha = sr.trial.alpha;
  rec.phi0 = st.loss;
  rec.dphi0 = dphi0;
  rec.phi = sr.trial.phi;
  rec.dphi = sr.trial.dphi;
  rec.evaluations = sr.evaluations;
  rec.steepest_fallback = fallback;
  st.steps.push_back(rec);

  st.params = std::move(sr.trial.x);
  st.grad = std::move(sr.trial.g);
  st.loss = sr.trial.phi;
  ++st.inner_steps;
  return true;
}

}  // namespace

TrainState lbfgs_minimize(const Objective& f, TrainState st, std::size_t max_epochs,
                          double tolerance, const LbfgsOptions& opt,
                          const IterationCallback& callback) {
  if (opt.history == 0) throw std::invalid_argument("L-BFGS history must be positive");
  if (opt.inner_iterations == 0 || opt.max_evaluations == 0 || opt.max_line_search == 0) {
    throw std::invalid_argument("L-BFGS iteration and evaluation limits must be positive");
  }
  if (!(opt.c1 > 0.0 && opt.c1 < opt.c2 && opt.c2 < 1.0)) {
    throw std::invalid_argument("Wolfe constants need 0 < c1 < c2 < 1");
  }
  st.status = Status::Running;
  if (!st.evaluated || st.grad.size() != st.params.size()) {
    evaluate_current(f, st);
    if (st.iteration == 0 && callback) callback(st);
  }

  for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
    std::size_t epoch_evals = 0;
    for (std::size_t k = 0; k < opt.inner_iterations && epoch_evals < opt.max_evaluations; ++k) {
      if (stationary(st.grad, tolerance)) break;
      if (!lbfgs_iteration(f, st, opt, epoch_evals)) {
        ++st.iteration;
        st.status = Status::LineSearchFailed;
        st.message = "line search failed in epoch " + std::to_string(st.iteration);
        if (callback) callback(st);
        return st;
      }
    }
    ++st.iteration;
    if (callback) callback(st);
    if (stationary(st.grad, tolerance)) {
      st.status = Status::Converged;
      return st;
    }
  }
  st.status = stationary(st.grad, tolerance) ? Status::Converged : Status::MaxIterations;
  return st;
}

TrainState adam_minimize(const Objective& f, TrainState st, std::size_t max_iters,
                         const AdamOptions& opt, const IterationCallback& callback) {
  if (!(opt.lr > 0.0)) throw std::invalid_argument("Adam learning rate must be positive");
  if (!(opt.beta1 >= 0.0 && opt.beta1 < 1.0 && opt.beta2 >= 0.0 && opt.beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  st.status = Status::Running;
  const std::size_t n = st.params.size();
  if (st.m.size() != n) st.m.assign(n, 0.0);
  if (st.v.size() != n) st.v.assign(n, 0.0);
  if (!st.evaluated || st.grad.size() != n) {
    evaluate_current(f, st);
    if (st.iteration == 0 && callback) callback(st);
  }
  for (std::size_t it = 0; it < max_iters; ++it) {
    ++st.adam_t;
    const double t = static_cast<double>(st.adam_t);
    const double bc1 = 1.0 - std::pow(opt.beta1, t);
    const double bc2 = 1.0 - std::pow(opt.beta2, t);
    for (std::size_t j = 0; j < n; ++j) {
      const double g = st.grad[j];
      st.m[j] = opt.beta1 * st.m[j] + (1.0 - opt.beta1) * g;
      st.v[j] = opt.beta2 * st.v[j] + (1.0 - opt.beta2) * g * g;
      const double mhat = st.m[j] / bc1;
      const double vhat = st.v[j] / bc2;
      st.params[j] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
    ++st.iteration;
    evaluate_current(f, st);
    if (callback) callback(st);
  }
  st.status = Status::MaxIterations;
  return st;
}

}  // namespace qpinn::train
