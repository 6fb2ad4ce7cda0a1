#pragma once

// Experiment configuration: a JSON document with blocks problem, model,
// collocation, training, oracle and output. Unknown keys are rejected and
// omitted keys take defaults that depend on problem.dim.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qpinn/loss.hpp"
#include "qpinn/model.hpp"
#include "qpinn/optim.hpp"
#include "qpinn/oracle.hpp"
#include "qpinn/pde.hpp"

namespace qpinn::cli {

enum class Optimizer { Lbfgs, Adam };

struct TrainingSettings {
  Optimizer optimizer = Optimizer::Lbfgs;
  std::size_t epochs = 150;
  std::uint64_t seed = 7;
  double tolerance = 1e-12;
  train::LossWeights weights;
  train::Reduction reduction = train::Reduction::Sum;
  train::LbfgsOptions lbfgs;
  train::AdamOptions adam;
  std::size_t batch = 32;
};

struct OracleSettings {
  std::size_t nx = 201;
  std::vector<double> output_times;
  oracle::Rk45Config rk45;
};

struct OutputSettings {
  std::string directory = "runs/default";
  std::vector<std::string> formats{"csv"};
  std::size_t eval_nx = 101;
  std::vector<double> eval_times;
  bool log_timing = false;
};

struct ExperimentConfig {
  pde::HeatProblem problem;
  std::string kappa_text;  // as written, e.g. "0.01/pi"
  train::ModelConfig model;
  std::size_t nx = 0;
  std::size_t nt = 0;
  TrainingSettings training;
  OracleSettings oracle;
  OutputSettings output;
};

/// Parses "0.01/pi", "2/pi", "pi", "3*pi", "0.5" and plain numbers.
double parse_kappa(std::string_view text);

/// Throws ConfigError naming the offending key.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every field written out explicitly; parse_config(to_json(c)) == c.
std::string to_json(const ExperimentConfig& config);

/// Defaults for a problem dimension (1 or 2).
ExperimentConfig default_config(std::size_t dim);

/// JSON text of only the problem block, for comparing runs.
std::string problem_json(const ExperimentConfig& config);

}  // namespace qpinn::cli
