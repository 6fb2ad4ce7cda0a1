#include "qpinn/runner.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "qpinn/errors.hpp"
#include "qpinn/io.hpp"
#include "qpinn/loss.hpp"
#include "qpinn/metrics.hpp"
#include "qpinn/optim.hpp"
#include "qpinn/oracle.hpp"

namespace qpinn::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory '" + dir.string() + "': " + ec.message());
}

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + "\n"); }

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool wants(const ExperimentConfig& c, const std::string& format) {
  return std::find(c.output.formats.begin(), c.output.formats.end(), format) != c.output.formats.end();
}

std::vector<std::vector<double>> eval_axes(const pde::HeatProblem& problem, std::size_t nx,
                                           const std::vector<double>& times) {
  auto axes = oracle::spatial_axes(problem, nx);
  axes.push_back(times);
  return axes;
}

// The closed form when the problem has one, otherwise an RK45 solve.
pde::SolutionGrid reference_grid(const ExperimentConfig& c, std::string& kind) {
  if (oracle::has_analytic_solution(c.problem)) {
    kind = "analytic";
    return oracle::analytic_grid(c.problem, c.output.eval_nx, c.output.eval_times);
  }
  if (c.output.eval_nx < 3) throw ConfigError("output.eval_nx must be >= 3 without a closed form");
  kind = "rk45";
  return oracle::rk45_solve(c.problem, c.output.eval_nx, c.output.eval_times, c.oracle.rk45);
}

// Heatmaps of a (x, t) grid, or of each time slice of a (x, y, t) grid.
void write_heatmaps(const fs::path& dir, const std::string& stem, const pde::SolutionGrid& grid,
                    std::optional<io::ColorRange> range = std::nullopt) {
  const auto r = range ? *range : io::symmetric_range(grid.values);
  if (grid.axes.size() == 2) {
    io::write_file(dir / (stem + ".ppm"), io::render_ppm(grid, r));
    return;
  }
  for (std::size_t k = 0; k < grid.axes[2].size(); ++k) {
    io::write_file(dir / (stem + "_t" + std::to_string(k) + ".ppm"),
                   io::render_ppm(io::time_slice(grid, k), r));
  }
}

json breakdown_json(std::size_t iter, const train::LossBreakdown& b, double grad_norm, double step) {
  json j;
  j["iter"] = iter;
  j["loss_total"] = b.total;
  j["loss_pde"] = b.pde;
  j["loss_bc"] = b.bc;
  j["loss_ic"] = b.ic;
  j["grad_norm"] = grad_norm;
  j["step_len"] = step;
  return j;
}

}  // namespace

ExperimentConfig resolve(ExperimentConfig config, const RunOptions& options) {
  if (options.seed) config.training.seed = *options.seed;
  if (options.out_dir) config.output.directory = options.out_dir->string();
  return config;
}

TrainSummary cmd_train(const fs::path& config_path, const RunOptions& options) {
  return cmd_train(load_config(config_path), options);
}

TrainSummary cmd_train(const ExperimentConfig& raw, const RunOptions& options) {
  const auto t_start = Clock::now();
  const ExperimentConfig c = resolve(raw, options);
  const std::string resolved = to_json(c);
  // Where a run is written is not part of what it computes.
  ExperimentConfig located = c;
  located.output.directory.clear();
  const std::string identity = to_json(located);
  const std::string input_hash = io::git_blob_hash(identity);

  TrainSummary summary;
  summary.run_dir = c.output.directory;
  ensure_dir(summary.run_dir);
  io::write_file(summary.run_dir / "config.resolved.json", resolved);

  const train::Model model = train::build_model(c.model, c.problem);
  summary.param_count = model.num_parameters();
  if (options.dump_graph) {
    const expr::Node roots[] = {model.output()};
    io::write_file(summary.run_dir / "graph.dot", model.graph().to_dot(roots));
  }
  const auto collocation = pde::sample_collocation(c.problem, c.nx, c.nt);
  train::LossEvaluator evaluator(model, c.problem, collocation, c.training.weights,
                                 c.training.reduction,
                                 train::EvalOptions{std::max<std::size_t>(1, options.threads),
                                                    c.training.batch});

  // Evaluations of the current epoch, so the callback can report the loss
  // components at the accepted point without another evaluation.
  std::vector<std::pair<std::vector<double>, train::LossBreakdown>> recent;
  train::Objective objective = [&](std::span<const double> x, std::span<double> g) {
    const auto b = evaluator.value_and_gradient(x, g);
    recent.emplace_back(std::vector<double>(x.begin(), x.end()), b);
    return b.total;
  };

  std::ofstream metrics(summary.run_dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
  std::ofstream timing;
  if (c.output.log_timing) timing.open(summary.run_dir / "timing.jsonl", std::ios::binary | std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot write metrics.jsonl");

  std::vector<double> last_params = model.initial_parameters(c.training.seed);
  std::size_t last_iter = 0;
  train::LossBreakdown last_breakdown;
  train::IterationCallback callback = [&](const train::TrainState& s) {
    train::LossBreakdown b;
    auto hit = std::find_if(recent.rbegin(), recent.rend(), [&](const auto& e) { return e.first == s.params; });
    b = hit != recent.rend() ? hit->second : evaluator.value(s.params);
    recent.clear();
    std::vector<double> delta(s.params.size());
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = s.params[i] - last_params[i];
    metrics << breakdown_json(s.iteration, b, norm2(s.grad), norm2(delta)).dump() << '\n';
    metrics.flush();
    if (timing.is_open()) {
      timing << json{{"iter", s.iteration}, {"wall_ms", 1e3 * seconds_since(t_start)}}.dump() << '\n';
    }
    if (options.log) {
      char line[128];
      std::snprintf(line, sizeof line, "epoch %zu loss %.6e evals %zu\n", s.iteration, b.total, s.evaluations);
      *options.log << line << std::flush;
    }
    summary.loss_history.push_back(b.total);
    last_params = s.params;
    last_iter = s.iteration;
    last_breakdown = b;
  };

  const auto shape_hash = io::fnv1a64(model.shape_signature());
  train::TrainState state(last_params);
  try {
    if (c.training.optimizer == Optimizer::Lbfgs) {
      state = train::lbfgs_minimize(objective, std::move(state), c.training.epochs, c.training.tolerance,
                                    c.training.lbfgs, callback);
    } else {
      state = train::adam_minimize(objective, std::move(state), c.training.epochs, c.training.adam, callback);
    }
  } catch (const NumericalError& e) {
    metrics.close();
    io::write_checkpoint(summary.run_dir / "checkpoint.bin", {shape_hash, last_params, identity});
    json err;
    err["error"] = e.what();
    err["last_good_iter"] = last_iter;
    err["input_hash"] = input_hash;
    write_json(summary.run_dir / "error.json", err);
    throw;
  }
  metrics.close();
  io::write_checkpoint(summary.run_dir / "checkpoint.bin", {shape_hash, state.params, identity});

  std::string ref_kind;
  const auto reference = reference_grid(c, ref_kind);
  const auto result = train::evaluate(model, state.params, reference, c.problem, last_breakdown);
  auto prediction = train::predict_grid(model, state.params, reference.axes);
  if (wants(c, "csv")) {
    io::write_grid_csv(summary.run_dir / "prediction.csv", prediction);
    io::write_grid_csv(summary.run_dir / "abs_error.csv", result.abs_error);
  }
  if (wants(c, "ppm")) {
    write_heatmaps(summary.run_dir, "prediction", prediction);
    write_heatmaps(summary.run_dir, "abs_error", result.abs_error);
  }

  summary.status = train::to_string(state.status);
  summary.final_loss = last_breakdown.total;
  summary.l2_rel = result.l2_rel;
  summary.linf_rel = result.linf_rel;
  summary.wall_time = seconds_since(t_start);

  json s;
  s["status"] = summary.status;
  s["final_loss"] = summary.final_loss;
  s["loss_pde"] = last_breakdown.pde;
  s["loss_bc"] = last_breakdown.bc;
  s["loss_ic"] = last_breakdown.ic;
  s["l2_rel"] = summary.l2_rel;
  s["linf_rel"] = summary.linf_rel;
  s["param_count"] = summary.param_count;
  s["wall_time"] = summary.wall_time;
  s["epochs"] = state.iteration;
  s["evaluations"] = state.evaluations;
  s["model"] = train::to_string(c.model.kind);
  s["seed"] = c.training.seed;
  s["reference"] = ref_kind;
  s["input_hash"] = input_hash;
  write_json(summary.run_dir / "summary.json", s);
  return summary;
}

InferResult cmd_infer(const InferRequest& req, const RunOptions& options) {
  const auto ck = io::read_checkpoint(req.checkpoint);
  const ExperimentConfig c = parse_config(ck.config_json);
  const train::Model model = train::build_model(c.model, c.problem);
  if (io::fnv1a64(model.shape_signature()) != ck.shape_hash || ck.params.size() != model.num_parameters()) {
    throw ConfigError("checkpoint does not match its model configuration (shape hash mismatch)");
  }

  std::optional<pde::SolutionGrid> reference;
  std::vector<std::vector<double>> axes;
  if (req.reference) {
    reference = io::read_grid_csv(*req.reference);
    axes = reference->axes;
    if (axes.size() != c.problem.num_inputs()) {
      throw std::invalid_argument("reference grid has " + std::to_string(axes.size()) +
                                  " axes, the model takes " + std::to_string(c.problem.num_inputs()));
    }
  } else {
    axes = eval_axes(c.problem, req.nx.value_or(c.output.eval_nx), req.times.value_or(c.output.eval_times));
  }

  const fs::path dir = options.out_dir ? *options.out_dir : req.checkpoint.parent_path();
  ensure_dir(dir);
  InferResult out;
  out.prediction = dir / "prediction.csv";
  if (!reference) {
    io::write_grid_csv(out.prediction, train::predict_grid(model, ck.params, axes));
    return out;
  }
  const auto prediction = train::predict_grid(model, ck.params, axes);
  io::write_grid_csv(out.prediction, prediction);
  const auto norms = train::error_norms(prediction.values, reference->values);
  pde::SolutionGrid err{reference->axes, {}};
  err.values.resize(prediction.values.size());
  for (std::size_t i = 0; i < err.values.size(); ++i) {
    err.values[i] = std::abs(prediction.values[i] - reference->values[i]);
  }
  io::write_grid_csv(dir / "abs_error.csv", err);
  out.l2_rel = norms.l2_rel;
  out.linf_rel = norms.linf_rel;
  json s;
  s["checkpoint"] = req.checkpoint.string();
  s["reference"] = req.reference->string();
  s["l2_rel"] = norms.l2_rel;
  s["linf_rel"] = norms.linf_rel;
  write_json(dir / "infer_summary.json", s);
  return out;
}

std::vector<fs::path> cmd_oracle(const fs::path& config_path, const RunOptions& options) {
  return cmd_oracle(load_config(config_path), options);
}

std::vector<fs::path> cmd_oracle(const ExperimentConfig& raw, const RunOptions& options) {
  const ExperimentConfig c = resolve(raw, options);
  oracle::Rk45Trace trace;
  const auto grid = oracle::rk45_solve(c.problem, c.oracle.nx, c.oracle.output_times, c.oracle.rk45, &trace);
  const fs::path dir = c.output.directory;
  ensure_dir(dir);
  std::vector<fs::path> written{dir / "oracle.csv"};
  io::write_grid_csv(written[0], grid);
  json summary;
  summary["nx"] = c.oracle.nx;
  summary["accepted_steps"] = trace.accepted_dt.size();
  summary["rejected_steps"] = trace.rejected;
  summary["rhs_evaluations"] = trace.rhs_evaluations;
  written.push_back(dir / "oracle_summary.json");
  io::write_file(written.back(), summary.dump(2) + "\n");
  if (grid.axes.size() == 3) {
    for (std::size_t k = 0; k < grid.axes[2].size(); ++k) {
      // keep the t axis so each snapshot stays a valid x,y,t,u file
      const auto plane = io::time_slice(grid, k);
      pde::SolutionGrid snap{{plane.axes[0], plane.axes[1], {grid.axes[2][k]}}, plane.values};
      written.push_back(dir / ("oracle_t" + std::to_string(k) + ".csv"));
      io::write_grid_csv(written.back(), snap);
    }
  }
  if (wants(c, "ppm")) write_heatmaps(dir, "oracle", grid);
  return written;
}

std::vector<CompareRow> compare_runs(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.size() < 2) throw std::invalid_argument("compare needs at least two run directories");
  std::vector<CompareRow> rows;
  std::optional<std::string> problem;
  std::string problem_owner;
  for (const auto& dir : run_dirs) {
    CompareRow row;
    row.run = dir.string();
    row.status = "incomplete";
    const fs::path cfg = dir / "config.resolved.json";
    const fs::path sum = dir / "summary.json";
    if (fs::exists(cfg) && fs::exists(sum)) {
      const auto p = problem_json(load_config(cfg));
      if (!problem) {
        problem = p;
        problem_owner = row.run;
      } else if (*problem != p) {
        throw ConfigError("runs '" + problem_owner + "' and '" + row.run + "' solve different problems");
      }
      json s;
      try {
        s = json::parse(io::read_file(sum));
        row.final_loss = s.at("final_loss").get<double>();
        row.l2_rel = s.at("l2_rel").get<double>();
        row.linf_rel = s.at("linf_rel").get<double>();
        row.param_count = s.at("param_count").get<std::size_t>();
        row.wall_time = s.at("wall_time").get<double>();
        row.status = "ok";
      } catch (const json::exception&) {
        row.status = "incomplete";
      }
    }
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const CompareRow& a, const CompareRow& b) {
    const bool ia = a.status != "ok", ib = b.status != "ok";
    if (ia != ib) return ib;
    return !ia && a.l2_rel < b.l2_rel;
  });
  return rows;
}

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4e", v);
  return buf;
}

}  // namespace

std::string format_table(const std::vector<CompareRow>& rows) {
  std::vector<std::array<std::string, 7>> cells;
  cells.push_back({"run", "status", "final_loss", "l2_rel", "linf_rel", "param_count", "wall_time"});
  for (const auto& r : rows) {
    if (r.status != "ok") {
      cells.push_back({r.run, r.status, "-", "-", "-", "-", "-"});
      continue;
    }
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.1f", r.wall_time);
    cells.push_back({r.run, r.status, sci(r.final_loss), sci(r.l2_rel), sci(r.linf_rel),
                     std::to_string(r.param_count), wall});
  }
  std::array<std::size_t, 7> width{};
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += "  ";
      // first column left aligned, numbers right aligned
      const std::string pad(width[i] - row[i].size(), ' ');
      out += i < 2 ? row[i] + (i + 1 < row.size() ? pad : "") : pad + row[i];
    }
    out += '\n';
  }
  return out;
}

std::string rows_to_csv(const std::vector<CompareRow>& rows) {
  std::string out = "run,status,final_loss,l2_rel,linf_rel,param_count,wall_time\n";
  for (const auto& r : rows) {
    out += r.run + "," + r.status;
    if (r.status == "ok") {
      out += "," + io::format_double(r.final_loss) + "," + io::format_double(r.l2_rel) + "," +
             io::format_double(r.linf_rel) + "," + std::to_string(r.param_count) + "," +
             io::format_double(r.wall_time);
    } else {
      out += ",,,,,";
    }
    out += '\n';
  }
  return out;
}

std::vector<CompareRow> cmd_compare(const std::vector<fs::path>& run_dirs, const RunOptions& options,
                                    std::ostream& out) {
  auto rows = compare_runs(run_dirs);
  out << format_table(rows);
  if (options.out_dir) {
    ensure_dir(*options.out_dir);
    io::write_file(*options.out_dir / "compare.csv", rows_to_csv(rows));
  }
  return rows;
}

void cmd_plot(const PlotRequest& req) {
  auto grid = io::read_grid_csv(req.csv);
  if (grid.axes.size() == 3) {
    if (!req.slice) throw std::invalid_argument("an (x, y, t) grid needs a time slice index");
    grid = io::time_slice(grid, *req.slice);
  } else if (req.slice && *req.slice != 0) {
    throw std::invalid_argument("slice index given for a two-axis grid");
  }
  io::ColorRange range = io::symmetric_range(grid.values);
  if (req.lo) range.lo = *req.lo;
  if (req.hi) range.hi = *req.hi;
  if (!(range.hi > range.lo)) throw std::invalid_argument("color range needs hi > lo");
  if (!req.output.parent_path().empty()) ensure_dir(req.output.parent_path());
  io::write_file(req.output, io::render_ppm(grid, range));
}

}  // namespace qpinn::cli
