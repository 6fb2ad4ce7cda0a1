#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qpinn/errors.hpp"
#include "qpinn/runner.hpp"

namespace fs = std::filesystem;
using namespace qpinn;

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed heat-equation solver with quantum and classical models"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::size_t threads = 1;
  bool dump_graph = false;
  bool quiet = false;
  app.add_option("--seed", seed, "Override training.seed");
  app.add_option("--threads", threads, "Worker threads for collocation evaluation")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", out_dir, "Output directory (overrides output.directory)");
  app.add_flag("--dump-graph", dump_graph, "Write the model graph as graph.dot");
  app.add_flag("-q,--quiet", quiet, "No per-epoch progress on stderr");

  auto* config_cmd = app.add_subcommand("config", "Print the default configuration for a dimension");
  std::size_t dim = 1;
  config_cmd->add_option("--dim", dim, "Spatial dimension (1 or 2)");

  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  std::string train_config;
  train_cmd->add_option("config", train_config, "Experiment config (JSON)")->required();

  auto* infer_cmd = app.add_subcommand("infer", "Evaluate a checkpoint on a grid");
  cli::InferRequest infer;
  std::string checkpoint;
  std::optional<std::string> reference;
  std::optional<std::size_t> infer_nx;
  std::optional<std::vector<double>> infer_times;
  infer_cmd->add_option("checkpoint", checkpoint, "checkpoint.bin from a training run")->required();
  infer_cmd->add_option("--reference", reference, "Reference CSV; its grid is used and errors are reported");
  infer_cmd->add_option("--nx", infer_nx, "Nodes per spatial dimension");
  infer_cmd->add_option("--times", infer_times, "Output times")->delimiter(',');

  auto* oracle_cmd = app.add_subcommand("oracle", "RK45 method-of-lines reference solution");
  std::string oracle_config;
  oracle_cmd->add_option("config", oracle_config, "Experiment config (JSON)")->required();

  auto* compare_cmd = app.add_subcommand("compare", "Tabulate completed runs");
  std::vector<std::string> runs;
  compare_cmd->add_option("runs", runs, "Run directories")->required()->expected(2, -1);

  auto* plot_cmd = app.add_subcommand("plot", "Render a grid CSV as a P6 heatmap");
  cli::PlotRequest plot;
  std::string plot_csv, plot_out;
  std::vector<double> range;
  std::optional<std::size_t> slice;
  plot_cmd->add_option("csv", plot_csv, "Grid CSV")->required();
  plot_cmd->add_option("output", plot_out, "Output .ppm")->required();
  plot_cmd->add_option("--range", range, "Color range: LO HI (default symmetric about 0)")->expected(2);
  plot_cmd->add_option("--slice", slice, "Time index for x,y,t grids");

  CLI11_PARSE(app, argc, argv);

  cli::RunOptions opts;
  opts.seed = seed;
  if (out_dir) opts.out_dir = fs::path(*out_dir);
  opts.threads = threads;
  opts.dump_graph = dump_graph;
  if (!quiet) opts.log = &std::cerr;

  try {
    if (*config_cmd) {
      std::cout << cli::to_json(cli::default_config(dim));
    } else if (*train_cmd) {
      const auto s = cli::cmd_train(fs::path(train_config), opts);
      std::cout << "run " << s.run_dir.string() << ": status " << s.status << ", final_loss " << s.final_loss
                << ", l2_rel " << s.l2_rel << ", linf_rel " << s.linf_rel << "\n";
    } else if (*infer_cmd) {
      infer.checkpoint = checkpoint;
      if (reference) infer.reference = fs::path(*reference);
      infer.nx = infer_nx;
      infer.times = infer_times;
      const auto r = cli::cmd_infer(infer, opts);
      std::cout << "wrote " << r.prediction.string() << "\n";
      if (r.l2_rel) std::cout << "l2_rel " << *r.l2_rel << ", linf_rel " << *r.linf_rel << "\n";
    } else if (*oracle_cmd) {
      for (const auto& p : cli::cmd_oracle(fs::path(oracle_config), opts)) std::cout << "wrote " << p.string() << "\n";
    } else if (*compare_cmd) {
      std::vector<fs::path> dirs(runs.begin(), runs.end());
      cli::cmd_compare(dirs, opts, std::cout);
    } else if (*plot_cmd) {
      plot.csv = plot_csv;
      plot.output = plot_out;
      if (range.size() == 2) {
        plot.lo = range[0];
        plot.hi = range[1];
      }
      plot.slice = slice;
      cli::cmd_plot(plot);
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return cli::kExitNumerical;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return cli::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return EXIT_FAILURE;
  }
  return cli::kExitOk;
}
