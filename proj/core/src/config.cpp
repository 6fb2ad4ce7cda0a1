#include "qpinn/config.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "qpinn/errors.hpp"
#include "qpinn/io.hpp"

namespace qpinn::cli {

using json = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

double parse_plain(const std::string& s) {
  if (s == "pi") return std::numbers::pi;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ConfigError("kappa: cannot parse '" + s + "'");
  return v;
}

// Strict view of one JSON object: every key must be read, leftovers are errors.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::size_t count(const std::string& key, std::size_t def) {
    if (!has(key)) return def;
    const auto& v = raw(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) fail(key, "expected a non-negative integer");
    return v.get<std::size_t>();
  }

  double number(const std::string& key, double def) {
    if (!has(key)) return def;
    const auto& v = raw(key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }

  std::string text(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    const auto& v = raw(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  bool flag(const std::string& key, bool def) {
    if (!has(key)) return def;
    const auto& v = raw(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> def) {
    if (!has(key)) return def;
    const auto& v = raw(key);
    if (!v.is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> def) {
    if (!has(key)) return def;
    const auto& v = raw(key);
    if (!v.is_array()) fail(key, "expected an array of non-negative integers");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<long long>() < 0) {
        fail(key, "expected an array of non-negative integers");
      }
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }

  Block child(const std::string& key) {
    static const json kEmpty = json::object();
    if (!has(key)) return Block(kEmpty, path_ + "." + key);
    return Block(raw(key), path_ + "." + key);
  }

  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    throw ConfigError(path_ + "." + key + ": " + why);
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!used_.count(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
    }
  }

  [[nodiscard]] const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

pde::FieldSpec parse_field(Block b, const pde::FieldSpec& def) {
  pde::FieldSpec f;
  try {
    f.kind = pde::field_kind_from_string(b.text("kind", pde::to_string(def.kind)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(b.path() + ".kind: " + e.what());
  }
  const bool same = f.kind == def.kind;
  f.amplitude = b.number("amplitude", same ? def.amplitude : 1.0);
  if (b.has("modes")) {
    const auto& v = b.raw("modes");
    if (!v.is_array()) b.fail("modes", "expected an array of integers");
    for (const auto& e : v) {
      if (!e.is_number_integer()) b.fail("modes", "expected an array of integers");
      f.modes.push_back(e.get<int>());
    }
  } else if (same) {
    f.modes = def.modes;
  }
  f.center = b.numbers("center", same ? def.center : std::vector<double>{});
  f.width = b.number("width", same ? def.width : 0.1);
  if (b.has("axes")) {
    const auto& v = b.raw("axes");
    if (!v.is_array()) b.fail("axes", "expected an array of arrays");
    for (const auto& axis : v) {
      if (!axis.is_array()) b.fail("axes", "expected an array of arrays");
      std::vector<double> a;
      for (const auto& e : axis) {
        if (!e.is_number()) b.fail("axes", "expected numbers");
        a.push_back(e.get<double>());
      }
      f.table_axes.push_back(std::move(a));
    }
  } else if (same) {
    f.table_axes = def.table_axes;
  }
  f.table_values = b.numbers("values", same ? def.table_values : std::vector<double>{});
  b.finish();
  return f;
}

json field_json(const pde::FieldSpec& f) {
  json j;
  j["kind"] = pde::to_string(f.kind);
  switch (f.kind) {
    case pde::FieldKind::Zero: break;
    case pde::FieldKind::SineMode:
      j["amplitude"] = f.amplitude;
      j["modes"] = f.modes;
      break;
    case pde::FieldKind::GaussianBump:
      j["amplitude"] = f.amplitude;
      j["center"] = f.center;
      j["width"] = f.width;
      break;
    case pde::FieldKind::Table:
      j["axes"] = f.table_axes;
      j["values"] = f.table_values;
      break;
  }
  return j;
}

json problem_block(const ExperimentConfig& c) {
  json p;
  p["dim"] = c.problem.dim;
  p["kappa"] = c.kappa_text;
  json bounds = json::array();
  for (const auto& iv : c.problem.space) bounds.push_back({iv.lo, iv.hi});
  p["bounds"] = bounds;
  p["t_max"] = c.problem.t_max;
  p["ic"] = field_json(c.problem.ic);
  p["bc"] = field_json(c.problem.bc);
  p["source"] = field_json(c.problem.source);
  return p;
}

void check_times(const std::vector<double>& times, double t_max, const std::string& where) {
  if (times.empty()) throw ConfigError(where + ": needs at least one time");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0 && times[i] <= t_max)) throw ConfigError(where + ": times must lie in [0, t_max]");
    if (i > 0 && !(times[i] > times[i - 1])) throw ConfigError(where + ": times must be increasing");
  }
}

}  // namespace

double parse_kappa(std::string_view text) {
  const std::string s = trim(text);
  double v = 0.0;
  if (const auto slash = s.find('/'); slash != std::string::npos) {
    const double den = parse_plain(trim(s.substr(slash + 1)));
    if (den == 0.0) throw ConfigError("kappa: division by zero");
    v = parse_plain(trim(s.substr(0, slash))) / den;
  } else if (const auto star = s.find('*'); star != std::string::npos) {
    v = parse_plain(trim(s.substr(0, star))) * parse_plain(trim(s.substr(star + 1)));
  } else {
    v = parse_plain(s);
  }
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("kappa must be a positive finite number");
  return v;
}

ExperimentConfig default_config(std::size_t dim) {
  ExperimentConfig c;
  if (dim == 1) {
    c.problem = pde::default_problem_1d();
    c.kappa_text = "0.01/pi";
    c.nx = 13;
    c.nt = 13;
    c.oracle.nx = 201;
    c.oracle.output_times = {0.25, 0.5, 1.0};
    c.output.eval_nx = 101;
    c.output.eval_times = pde::linspace(0.0, 1.0, 101);
  } else if (dim == 2) {
    c.problem = pde::default_problem_2d();
    c.kappa_text = "2/pi";
    c.nx = 50;
    c.nt = 50;
    c.oracle.nx = 50;
    c.oracle.output_times = {0.0, 0.039, 0.058, 0.097};
    c.output.eval_nx = 50;
    c.output.eval_times = {0.0, 0.039, 0.058, 0.097};
  } else {
    throw ConfigError("problem.dim must be 1 or 2");
  }
  c.output.directory = "runs/heat" + std::to_string(dim) + "d";
  return c;
}

ExperimentConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Block top(root, "config");
  Block pb = top.child("problem");
  const std::size_t dim = pb.count("dim", 1);
  ExperimentConfig c = default_config(dim);

  // problem
  if (pb.has("kappa")) {
    const auto& k = pb.raw("kappa");
    if (k.is_string()) {
      c.kappa_text = k.get<std::string>();
    } else if (k.is_number()) {
      c.kappa_text = io::format_double(k.get<double>());
    } else {
      pb.fail("kappa", "expected a number or a string such as \"0.01/pi\"");
    }
  }
  c.problem.kappa = parse_kappa(c.kappa_text);
  if (pb.has("bounds")) {
    const auto& b = pb.raw("bounds");
    if (!b.is_array() || b.size() != dim) pb.fail("bounds", "expected one [lo, hi] pair per spatial dimension");
    c.problem.space.clear();
    for (const auto& pair : b) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
        pb.fail("bounds", "expected [lo, hi] pairs of numbers");
      }
      c.problem.space.push_back({pair[0].get<double>(), pair[1].get<double>()});
    }
  }
  c.problem.t_max = pb.number("t_max", c.problem.t_max);
  c.problem.ic = parse_field(pb.child("ic"), c.problem.ic);
  c.problem.bc = parse_field(pb.child("bc"), c.problem.bc);
  c.problem.source = parse_field(pb.child("source"), c.problem.source);
  pb.finish();
  try {
    c.problem.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }

  // model
  Block mb = top.child("model");
  try {
    c.model.kind = train::model_kind_from_string(mb.text("kind", train::to_string(c.model.kind)));
    c.model.entangler = qmodel::entangler_from_string(mb.text("entangler", qmodel::to_string(c.model.entangler)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  c.model.n_qubits = mb.count("n_qubits", c.model.n_qubits);
  c.model.n_layers = mb.count("n_layers", c.model.n_layers);
  c.model.fnn_hidden = mb.counts("fnn_hidden", c.model.fnn_hidden);
  c.model.pinn_hidden = mb.counts("pinn_hidden", c.model.pinn_hidden);
  c.model.aux_layers = mb.count("aux_layers", c.model.aux_layers);
  mb.finish();
  try {
    c.model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }

  // collocation
  Block cb = top.child("collocation");
  c.nx = cb.count("nx", c.nx);
  c.nt = cb.count("nt", c.nt);
  cb.finish();
  if (c.nx < 3 || c.nt < 2) throw ConfigError("collocation: need nx >= 3 and nt >= 2");

  // training
  Block tb = top.child("training");
  const std::string opt = tb.text("optimizer", "lbfgs");
  if (opt == "lbfgs") {
    c.training.optimizer = Optimizer::Lbfgs;
  } else if (opt == "adam") {
    c.training.optimizer = Optimizer::Adam;
  } else {
    tb.fail("optimizer", "expected lbfgs or adam");
  }
  c.training.epochs = tb.count("epochs", c.training.epochs);
  c.training.seed = tb.count("seed", c.training.seed);
  c.training.tolerance = tb.number("tolerance", c.training.tolerance);
  c.training.weights.lambda_bc = tb.number("lambda_bc", c.training.weights.lambda_bc);
  c.training.weights.lambda_ic = tb.number("lambda_ic", c.training.weights.lambda_ic);
  try {
    c.training.reduction = train::reduction_from_string(tb.text("reduction", "sum"));
    c.training.weights.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("training: ") + e.what());
  }
  c.training.batch = tb.count("batch", c.training.batch);
  if (c.training.batch == 0) tb.fail("batch", "must be positive");
  if (!(c.training.tolerance >= 0.0)) tb.fail("tolerance", "must be >= 0");
  {
    Block lb = tb.child("lbfgs");
    auto& o = c.training.lbfgs;
    o.history = lb.count("history", o.history);
    o.inner_iterations = lb.count("inner_iterations", o.inner_iterations);
    o.max_evaluations = lb.count("max_evaluations", o.max_evaluations);
    o.c1 = lb.number("c1", o.c1);
    o.c2 = lb.number("c2", o.c2);
    o.max_line_search = lb.count("max_line_search", o.max_line_search);
    o.max_backtracks = lb.count("max_backtracks", o.max_backtracks);
    lb.finish();
    if (o.history == 0 || o.inner_iterations == 0 || o.max_evaluations == 0 || o.max_line_search == 0) {
      throw ConfigError("training.lbfgs: history and iteration limits must be positive");
    }
    if (!(o.c1 > 0.0 && o.c1 < o.c2 && o.c2 < 1.0)) {
      throw ConfigError("training.lbfgs: need 0 < c1 < c2 < 1");
    }
  }
  {
    Block ab = tb.child("adam");
    auto& o = c.training.adam;
    o.lr = ab.number("lr", o.lr);
    o.beta1 = ab.number("beta1", o.beta1);
    o.beta2 = ab.number("beta2", o.beta2);
    o.eps = ab.number("eps", o.eps);
    ab.finish();
    if (!(o.lr > 0.0) || !(o.beta1 >= 0.0 && o.beta1 < 1.0) || !(o.beta2 >= 0.0 && o.beta2 < 1.0) ||
        !(o.eps > 0.0)) {
      throw ConfigError("training.adam: need lr > 0, betas in [0, 1), eps > 0");
    }
  }
  tb.finish();

  // oracle
  Block ob = top.child("oracle");
  c.oracle.nx = ob.count("nx", c.oracle.nx);
  c.oracle.output_times = ob.numbers("output_times", c.oracle.output_times);
  c.oracle.rk45.abs_tol = ob.number("abs_tol", c.oracle.rk45.abs_tol);
  c.oracle.rk45.rel_tol = ob.number("rel_tol", c.oracle.rk45.rel_tol);
  c.oracle.rk45.initial_dt = ob.number("initial_dt", c.oracle.rk45.initial_dt);
  c.oracle.rk45.max_dt = ob.number("max_dt", c.oracle.rk45.max_dt);
  ob.finish();
  if (c.oracle.nx < 3) throw ConfigError("oracle.nx must be >= 3");
  check_times(c.oracle.output_times, c.problem.t_max, "oracle.output_times");
  try {
    c.oracle.rk45.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("oracle: ") + e.what());
  }

  // output
  Block xb = top.child("output");
  c.output.directory = xb.text("directory", c.output.directory);
  if (xb.has("formats")) {
    const auto& f = xb.raw("formats");
    if (!f.is_array()) xb.fail("formats", "expected an array of strings");
    c.output.formats.clear();
    for (const auto& e : f) {
      if (!e.is_string() || (e != "csv" && e != "ppm")) xb.fail("formats", "entries must be \"csv\" or \"ppm\"");
      c.output.formats.push_back(e.get<std::string>());
    }
  }
  c.output.eval_nx = xb.count("eval_nx", c.output.eval_nx);
  c.output.eval_times = xb.numbers("eval_times", c.output.eval_times);
  c.output.log_timing = xb.flag("log_timing", c.output.log_timing);
  xb.finish();
  if (c.output.eval_nx < 2) throw ConfigError("output.eval_nx must be >= 2");
  check_times(c.output.eval_times, c.problem.t_max, "output.eval_times");

  top.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string to_json(const ExperimentConfig& c) {
  json root;
  root["problem"] = problem_block(c);

  json m;
  m["kind"] = train::to_string(c.model.kind);
  m["n_qubits"] = c.model.n_qubits;
  m["n_layers"] = c.model.n_layers;
  m["entangler"] = qmodel::to_string(c.model.entangler);
  m["fnn_hidden"] = c.model.fnn_hidden;
  m["pinn_hidden"] = c.model.pinn_hidden;
  m["aux_layers"] = c.model.aux_layers;
  root["model"] = m;

  root["collocation"] = {{"nx", c.nx}, {"nt", c.nt}};

  json t;
  t["optimizer"] = c.training.optimizer == Optimizer::Lbfgs ? "lbfgs" : "adam";
  t["epochs"] = c.training.epochs;
  t["seed"] = c.training.seed;
  t["tolerance"] = c.training.tolerance;
  t["lambda_bc"] = c.training.weights.lambda_bc;
  t["lambda_ic"] = c.training.weights.lambda_ic;
  t["reduction"] = train::to_string(c.training.reduction);
  t["batch"] = c.training.batch;
  const auto& lo = c.training.lbfgs;
  t["lbfgs"] = {{"history", lo.history},
                {"inner_iterations", lo.inner_iterations},
                {"max_evaluations", lo.max_evaluations},
                {"c1", lo.c1},
                {"c2", lo.c2},
                {"max_line_search", lo.max_line_search},
                {"max_backtracks", lo.max_backtracks}};
  const auto& ao = c.training.adam;
  t["adam"] = {{"lr", ao.lr}, {"beta1", ao.beta1}, {"beta2", ao.beta2}, {"eps", ao.eps}};
  root["training"] = t;

  json o;
  o["nx"] = c.oracle.nx;
  o["output_times"] = c.oracle.output_times;
  o["abs_tol"] = c.oracle.rk45.abs_tol;
  o["rel_tol"] = c.oracle.rk45.rel_tol;
  o["initial_dt"] = c.oracle.rk45.initial_dt;
  o["max_dt"] = c.oracle.rk45.max_dt;
  root["oracle"] = o;

  json x;
  x["directory"] = c.output.directory;
  x["formats"] = c.output.formats;
  x["eval_nx"] = c.output.eval_nx;
  x["eval_times"] = c.output.eval_times;
  x["log_timing"] = c.output.log_timing;
  root["output"] = x;
  return root.dump(2) + "\n";
}

std::string problem_json(const ExperimentConfig& config) { return problem_block(config).dump(); }

}  // namespace qpinn::cli
