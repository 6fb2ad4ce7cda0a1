#pragma once

// The commands behind the qpinn executable. Each writes its outputs into a
// directory and reports failures by exception: ConfigError or
// std::invalid_argument for bad input (exit code 2), NumericalError for a
// numerical abort (exit code 3).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qpinn/config.hpp"

namespace qpinn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct RunOptions {
  std::optional<std::uint64_t> seed;           // overrides training.seed
  std::optional<std::filesystem::path> out_dir;  // overrides output.directory
  std::size_t threads = 1;
  bool dump_graph = false;
  std::ostream* log = nullptr;  // progress lines, if set
};

struct TrainSummary {
  std::filesystem::path run_dir;
  std::string status;  // optimizer status, or "aborted"
  double final_loss = 0.0;
  double l2_rel = 0.0;
  double linf_rel = 0.0;
  std::size_t param_count = 0;
  double wall_time = 0.0;  // seconds
  std::vector<double> loss_history;  // one entry per logged epoch, epoch 0 first
};

/// Config with the command-line overrides applied; this is what a run records.
ExperimentConfig resolve(ExperimentConfig config, const RunOptions& options);

/// Trains and writes config.resolved.json, metrics.jsonl, checkpoint.bin,
/// prediction/abs_error grids and summary.json into the run directory. On a
/// numerical abort it writes the last good checkpoint and error.json, then
/// rethrows. The checkpoint's embedded config and the input hash leave out
/// output.directory, so identical experiments agree byte for byte wherever
/// they are written.
TrainSummary cmd_train(const ExperimentConfig& config, const RunOptions& options);
TrainSummary cmd_train(const std::filesystem::path& config_path, const RunOptions& options);

struct InferRequest {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> reference;  // CSV; its axes become the grid
  std::optional<std::size_t> nx;                   // default: output.eval_nx
  std::optional<std::vector<double>> times;        // default: output.eval_times
};

struct InferResult {
  std::filesystem::path prediction;
  std::optional<double> l2_rel;
  std::optional<double> linf_rel;
};

/// Writes prediction.csv and, with a reference, abs_error.csv and
/// infer_summary.json. Default output directory: beside the checkpoint.
InferResult cmd_infer(const InferRequest& request, const RunOptions& options);

/// RK45 method-of-lines solve at oracle.nx and oracle.output_times. Writes
/// oracle.csv, oracle_summary.json with the step counts and, for two spatial
/// dimensions, one oracle_t<k>.csv per time.
std::vector<std::filesystem::path> cmd_oracle(const ExperimentConfig& config,
                                              const RunOptions& options);
std::vector<std::filesystem::path> cmd_oracle(const std::filesystem::path& config_path,
                                              const RunOptions& options);

struct CompareRow {
  std::string run;
  std::string status;  // "ok" or "incomplete"
  double final_loss = 0.0;
  double l2_rel = 0.0;
  double linf_rel = 0.0;
  std::size_t param_count = 0;
  double wall_time = 0.0;
};

/// Rows sorted by l2_rel (incomplete runs last). Throws ConfigError when the
/// completed runs disagree on the problem block.
std::vector<CompareRow> compare_runs(const std::vector<std::filesystem::path>& run_dirs);
std::string format_table(const std::vector<CompareRow>& rows);
std::string rows_to_csv(const std::vector<CompareRow>& rows);

/// Prints the table and, when out_dir is set, writes compare.csv there.
std::vector<CompareRow> cmd_compare(const std::vector<std::filesystem::path>& run_dirs,
                                    const RunOptions& options, std::ostream& out);

struct PlotRequest {
  std::filesystem::path csv;
  std::filesystem::path output;
  std::optional<double> lo;
  std::optional<double> hi;
  std::optional<std::size_t> slice;  // time index, required for (x, y, t) grids
};

void cmd_plot(const PlotRequest& request);

}  // namespace qpinn::cli
