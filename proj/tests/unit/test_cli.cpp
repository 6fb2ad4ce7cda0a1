#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qpinn/config.hpp"
#include "qpinn/errors.hpp"
#include "qpinn/io.hpp"
#include "qpinn/model.hpp"
#include "qpinn/runner.hpp"
#include "json.hpp"

using namespace qpinn;
using namespace qpinn::cli;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("qpinn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  ExperimentConfig tiny(std::size_t epochs = 2) const {
    auto c = default_config(1);
    c.model.n_qubits = 2;
    c.model.n_layers = 2;
    c.model.fnn_hidden = {4};
    c.nx = 5;
    c.nt = 5;
    c.training.epochs = epochs;
    c.oracle.nx = 21;
    c.output.eval_nx = 11;
    c.output.eval_times = {0.0, 0.5, 1.0};
    c.output.directory = (root_ / "run").string();
    return c;
  }

  fs::path write_config(const ExperimentConfig& c, const std::string& name) const {
    const auto p = root_ / name;
    io::write_file(p, to_json(c));
    return p;
  }

  fs::path root_;
};

std::size_t count_lines(const fs::path& p) {
  const auto text = io::read_file(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

RunOptions in_dir(const fs::path& dir, std::size_t threads = 1) {
  RunOptions o;
  o.out_dir = dir;
  o.threads = threads;
  return o;
}

}  // namespace

TEST_F(Cli, ZeroEpochsCheckpointIsSeededInit) {
  const auto c = tiny(0);
  const auto s = cmd_train(c, in_dir(root_ / "r0"));
  EXPECT_EQ(count_lines(s.run_dir / "metrics.jsonl"), 1u);
  const auto ck = io::read_checkpoint(s.run_dir / "checkpoint.bin");
  const auto model = train::build_model(c.model, c.problem);
  EXPECT_EQ(ck.params, model.initial_parameters(c.training.seed));
  EXPECT_EQ(ck.shape_hash, io::fnv1a64(model.shape_signature()));
  for (const char* f : {"config.resolved.json", "summary.json", "prediction.csv", "abs_error.csv"}) {
    EXPECT_TRUE(fs::exists(s.run_dir / f)) << f;
  }
  const auto summary = json::parse(io::read_file(s.run_dir / "summary.json"));
  for (const char* k : {"final_loss", "l2_rel", "linf_rel", "param_count", "wall_time"}) EXPECT_TRUE(summary.contains(k)) << k;
  EXPECT_EQ(summary["param_count"].get<std::size_t>(), model.num_parameters());
}

TEST_F(Cli, MetricsRecordFields) {
  const auto s = cmd_train(tiny(2), in_dir(root_ / "r"));
  std::ifstream in(s.run_dir / "metrics.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto rec = json::parse(line);
    EXPECT_EQ(rec["iter"].get<std::size_t>(), n);
    for (const char* k : {"loss_total", "loss_pde", "loss_bc", "loss_ic", "grad_norm", "step_len"}) {
      EXPECT_TRUE(rec.contains(k)) << k;
    }
    ++n;
  }
  EXPECT_EQ(n, 3u);
  EXPECT_EQ(s.loss_history.size(), 3u);
  EXPECT_FALSE(fs::exists(s.run_dir / "timing.jsonl"));
}

TEST_F(Cli, ResolvedConfigReloads) {
  const auto c = tiny(1);
  const auto s = cmd_train(c, in_dir(root_ / "r"));
  const auto back = load_config(s.run_dir / "config.resolved.json");
  EXPECT_EQ(back.output.directory, (root_ / "r").string());
  EXPECT_EQ(to_json(back), to_json(resolve(c, in_dir(root_ / "r"))));
}

TEST_F(Cli, RunsAreByteIdenticalAcrossDirectoriesAndThreads) {
  const auto c = tiny(3);
  const auto a = cmd_train(c, in_dir(root_ / "a", 1));
  const auto b = cmd_train(c, in_dir(root_ / "b", 1));
  const auto t = cmd_train(c, in_dir(root_ / "t", 3));
  for (const char* f : {"metrics.jsonl", "checkpoint.bin"}) {
    const auto ref = io::read_file(a.run_dir / f);
    EXPECT_EQ(io::read_file(b.run_dir / f), ref) << f;
    EXPECT_EQ(io::read_file(t.run_dir / f), ref) << f;
  }
}

TEST_F(Cli, SeedOverrideChangesInit) {
  auto o = in_dir(root_ / "s");
  o.seed = 99;
  const auto s = cmd_train(tiny(0), o);
  const auto c = tiny(0);
  const auto model = train::build_model(c.model, c.problem);
  EXPECT_EQ(io::read_checkpoint(s.run_dir / "checkpoint.bin").params, model.initial_parameters(99));
}

TEST_F(Cli, NumericalAbortLeavesPartialOutputs) {
  auto c = tiny(2);
  c.problem.kappa = 1e300;
  c.kappa_text = "1e300";
  c.model.kind = train::ModelKind::Pinn;
  c.model.pinn_hidden = {3};
  EXPECT_THROW(cmd_train(c, in_dir(root_ / "bad")), NumericalError);
  EXPECT_TRUE(fs::exists(root_ / "bad" / "error.json"));
  EXPECT_TRUE(fs::exists(root_ / "bad" / "checkpoint.bin"));
  EXPECT_FALSE(fs::exists(root_ / "bad" / "summary.json"));
}

TEST_F(Cli, InferConstantModelAgainstConstantReference) {
  // zero parameters make the quantum model read <Z...Z> of |0...0>, i.e. u = 1
  const auto s = cmd_train(tiny(0), in_dir(root_ / "r"));
  auto ck = io::read_checkpoint(s.run_dir / "checkpoint.bin");
  std::fill(ck.params.begin(), ck.params.end(), 0.0);
  io::write_checkpoint(root_ / "zero.bin", ck);
  pde::SolutionGrid ones{{{-1.0, 0.0, 1.0}, {0.0, 0.25, 1.0}}, std::vector<double>(9, 1.0)};
  io::write_grid_csv(root_ / "ones.csv", ones);

  InferRequest req;
  req.checkpoint = root_ / "zero.bin";
  req.reference = root_ / "ones.csv";
  const auto r = cmd_infer(req, in_dir(root_ / "inf"));
  ASSERT_TRUE(r.l2_rel.has_value());
  EXPECT_LT(*r.l2_rel, 1e-12);
  EXPECT_LT(*r.linf_rel, 1e-12);
  const auto pred = io::read_grid_csv(r.prediction);
  EXPECT_EQ(pred.axes, ones.axes);
  EXPECT_TRUE(fs::exists(root_ / "inf" / "abs_error.csv"));
  EXPECT_TRUE(fs::exists(root_ / "inf" / "infer_summary.json"));
}

TEST_F(Cli, InferWithoutReferenceUsesRequestedGrid) {
  const auto s = cmd_train(tiny(0), in_dir(root_ / "r"));
  InferRequest req;
  req.checkpoint = s.run_dir / "checkpoint.bin";
  req.nx = 7;
  req.times = std::vector<double>{0.0, 1.0};
  const auto r = cmd_infer(req, {});
  EXPECT_FALSE(r.l2_rel.has_value());
  EXPECT_EQ(r.prediction.parent_path(), s.run_dir);
  EXPECT_EQ(io::read_grid_csv(r.prediction).values.size(), 14u);
}

TEST_F(Cli, InferRejectsMismatchedCheckpoint) {
  const auto s = cmd_train(tiny(0), in_dir(root_ / "r"));
  auto ck = io::read_checkpoint(s.run_dir / "checkpoint.bin");
  ck.shape_hash ^= 1;
  io::write_checkpoint(root_ / "bad.bin", ck);
  EXPECT_THROW(cmd_infer({root_ / "bad.bin", {}, {}, {}}, {}), ConfigError);
  ck.shape_hash ^= 1;
  ck.params.pop_back();
  io::write_checkpoint(root_ / "short.bin", ck);
  EXPECT_THROW(cmd_infer({root_ / "short.bin", {}, {}, {}}, {}), ConfigError);
}

TEST_F(Cli, OracleDefaultShape) {
  auto c = default_config(1);
  const auto files = cmd_oracle(c, in_dir(root_ / "o"));
  EXPECT_EQ(count_lines(root_ / "o" / "oracle.csv"), 201u * 3 + 1);
  const auto summary = json::parse(io::read_file(root_ / "o" / "oracle_summary.json"));
  EXPECT_GT(summary["accepted_steps"].get<std::size_t>(), 0u);
  EXPECT_GT(summary["rhs_evaluations"].get<std::size_t>(), summary["accepted_steps"].get<std::size_t>());
  EXPECT_EQ(files.size(), 2u);
}

TEST_F(Cli, OracleTwoDimensionalSnapshots) {
  auto c = default_config(2);
  c.oracle.nx = 12;
  cmd_oracle(c, in_dir(root_ / "o"));
  for (int k = 0; k < 4; ++k) {
    const auto g = io::read_grid_csv(root_ / "o" / ("oracle_t" + std::to_string(k) + ".csv"));
    EXPECT_EQ(g.axes.size(), 3u);
    EXPECT_EQ(g.values.size(), 144u);
    EXPECT_EQ(g.axes[2][0], c.oracle.output_times[k]);
  }
}

TEST_F(Cli, OracleZeroInitialField) {
  auto c = default_config(1);
  c.problem.ic = pde::FieldSpec::zero();
  c.oracle.nx = 31;
  cmd_oracle(c, in_dir(root_ / "o"));
  for (double v : io::read_grid_csv(root_ / "o" / "oracle.csv").values) EXPECT_EQ(v, 0.0);
}

TEST_F(Cli, CompareSortsAndFlagsIncomplete) {
  auto c = tiny(1);
  cmd_train(c, in_dir(root_ / "a"));
  c.training.epochs = 4;
  cmd_train(c, in_dir(root_ / "b"));
  fs::create_directories(root_ / "empty");
  std::ostringstream out;
  auto o = in_dir(root_ / "cmp");
  const auto rows = cmd_compare({root_ / "empty", root_ / "a", root_ / "b"}, o, out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_LE(rows[0].l2_rel, rows[1].l2_rel);
  EXPECT_EQ(rows[2].status, "incomplete");
  EXPECT_EQ(rows[0].status, "ok");
  EXPECT_NE(out.str().find("incomplete"), std::string::npos);
  EXPECT_EQ(count_lines(root_ / "cmp" / "compare.csv"), 4u);
}

TEST_F(Cli, CompareIdenticalRunsGiveIdenticalRows) {
  const auto c = tiny(1);
  cmd_train(c, in_dir(root_ / "a"));
  cmd_train(c, in_dir(root_ / "b"));
  const auto rows = compare_runs({root_ / "a", root_ / "b"});
  EXPECT_EQ(rows[0].final_loss, rows[1].final_loss);
  EXPECT_EQ(rows[0].l2_rel, rows[1].l2_rel);
  EXPECT_EQ(rows[0].param_count, rows[1].param_count);
}

TEST_F(Cli, CompareRejectsDifferentProblems) {
  auto c = tiny(0);
  cmd_train(c, in_dir(root_ / "a"));
  c.problem.kappa = 0.5;
  c.kappa_text = "0.5";
  cmd_train(c, in_dir(root_ / "b"));
  EXPECT_THROW(compare_runs({root_ / "a", root_ / "b"}), ConfigError);
  EXPECT_THROW(compare_runs({root_ / "a"}), std::invalid_argument);
}

TEST_F(Cli, PlotWritesHeatmap) {
  pde::SolutionGrid g{{{0.0, 1.0}, {0.0, 1.0}}, {-1.0, 0.0, 0.0, 1.0}};
  io::write_grid_csv(root_ / "g.csv", g);
  cmd_plot({root_ / "g.csv", root_ / "g.ppm", {}, {}, {}});
  EXPECT_EQ(io::read_file(root_ / "g.ppm"), io::read_file(fs::path(QPINN_FIXTURES) / "quadrants.ppm"));

  pde::SolutionGrid g3{{{0.0, 1.0}, {0.0, 1.0}, {0.0, 0.5}}, std::vector<double>(8, 0.3)};
  io::write_grid_csv(root_ / "g3.csv", g3);
  EXPECT_THROW(cmd_plot({root_ / "g3.csv", root_ / "g3.ppm", {}, {}, {}}), std::invalid_argument);
  cmd_plot({root_ / "g3.csv", root_ / "g3.ppm", 0.0, 1.0, 1});
  EXPECT_EQ(io::read_file(root_ / "g3.ppm").substr(0, 11), "P6\n2 2\n255\n");
}

#ifdef QPINN_EXE
namespace {

int run_exe(const std::string& args) {
  const std::string cmd = std::string("\"") + QPINN_EXE + "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_F(Cli, ExecutableExitCodes) {
  io::write_file(root_ / "bad_key.json", R"({"problem": {"kapa": 1}})");
  io::write_file(root_ / "blowup.json", R"({"problem": {"kappa": "1e300"}, "oracle": {"nx": 21}})");
  io::write_file(root_ / "junk.csv", "not,a,grid\n1,2\n");
  auto c = tiny(0);
  const auto cfg = write_config(c, "tiny.json");

  EXPECT_EQ(run_exe("config --dim 2"), kExitOk);
  EXPECT_EQ(run_exe("train " + (root_ / "bad_key.json").string()), kExitConfig);
  EXPECT_EQ(run_exe("train " + (root_ / "missing.json").string()), kExitConfig);
  EXPECT_EQ(run_exe("plot " + (root_ / "junk.csv").string() + " " + (root_ / "x.ppm").string()), kExitConfig);
  EXPECT_EQ(run_exe("oracle " + (root_ / "blowup.json").string() + " --out-dir " + (root_ / "ob").string()),
            kExitNumerical);
  EXPECT_EQ(run_exe("--quiet train " + cfg.string() + " --out-dir " + (root_ / "exe").string()), kExitOk);
  EXPECT_TRUE(fs::exists(root_ / "exe" / "checkpoint.bin"));
}
#endif
