#include "qpinn/model.hpp"

#include <sstream>
#include <stdexcept>

namespace qpinn::train {

using expr::Node;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Pinn: return "pinn";
    case ModelKind::FnnTeQpinn: return "fnn-te-qpinn";
    case ModelKind::QnnTeQpinn: return "qnn-te-qpinn";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "pinn") return ModelKind::Pinn;
  if (s == "fnn-te-qpinn") return ModelKind::FnnTeQpinn;
  if (s == "qnn-te-qpinn") return ModelKind::QnnTeQpinn;
  throw std::invalid_argument("unknown model kind '" + s +
                              "' (expected pinn|fnn-te-qpinn|qnn-te-qpinn)");
}

void ModelConfig::validate() const {
  if (kind == ModelKind::Pinn) {
    if (pinn_hidden.empty()) throw std::invalid_argument("pinn needs at least one hidden layer");
    for (auto w : pinn_hidden) {
      if (w == 0) throw std::invalid_argument("pinn hidden width must be positive");
    }
    return;
  }
  if (n_qubits < 1 || n_qubits > qsim::kMaxQubits) throw std::invalid_argument("n_qubits out of range");
  if (n_layers < 1) throw std::invalid_argument("n_layers must be >= 1");
  if (kind == ModelKind::FnnTeQpinn) {
    for (auto w : fnn_hidden) {
      if (w == 0) throw std::invalid_argument("fnn hidden width must be positive");
    }
  }
}

Model::Model(std::unique_ptr<expr::Graph> graph, std::vector<Node> inputs, Node output,
             std::vector<embed::Parameter> parameters, std::optional<ModelKind> kind)
    : graph_(std::move(graph)),
      inputs_(std::move(inputs)),
      output_(output),
      params_(std::move(parameters)),
      kind_(kind) {
  if (!graph_ || output_.graph() != graph_.get()) {
    throw std::invalid_argument("Model: output must belong to the model graph");
  }
}

bool Model::bounded() const { return kind_.has_value() && *kind_ != ModelKind::Pinn; }

std::vector<double> Model::initial_parameters(std::uint64_t seed) const {
  return embed::init_params(params_, seed);
}

std::string Model::shape_signature() const {
  std::ostringstream os;
  os << (kind_ ? to_string(*kind_) : std::string("custom")) << ";inputs=" << inputs_.size();
  if (layout_) {
    os << ";qubits=" << layout_->n_qubits << ";layers=" << layout_->n_layers
       << ";entangler=" << qmodel::to_string(layout_->entangler);
  }
  os << ";params=" << params_.size();
  for (const auto& p : params_) os << ';' << graph_->variable_name(graph_->variable_id(p.variable.id()));
  return os.str();
}

std::vector<Node> make_inputs(expr::Graph& graph, std::size_t dim) {
  std::vector<Node> inputs;
  inputs.push_back(graph.variable("x"));
  if (dim == 2) inputs.push_back(graph.variable("y"));
  inputs.push_back(graph.variable("t"));
  return inputs;
}

Model build_model(const ModelConfig& config, const pde::HeatProblem& problem) {
  config.validate();
  problem.validate();
  auto graph = std::make_unique<expr::Graph>();
  auto inputs = make_inputs(*graph, problem.dim);
  std::vector<embed::Parameter> params;

  if (config.kind == ModelKind::Pinn) {
    std::vector<std::size_t> sizes{inputs.size()};
    sizes.insert(sizes.end(), config.pinn_hidden.begin(), config.pinn_hidden.end());
    sizes.push_back(1);
    auto mlp = embed::make_mlp(*graph, sizes, /*tanh_output=*/false, "mlp", "mlp", params);
    Node u = embed::mlp_forward(mlp, inputs)[0];
    return Model(std::move(graph), std::move(inputs), u, std::move(params), config.kind);
  }

  const qmodel::CircuitLayout layout{config.n_qubits, config.n_layers, config.entangler};
  std::vector<Node> theta_var;
  for (std::size_t l = 0; l < layout.n_layers; ++l) {
    for (std::size_t k = 0; k < layout.n_qubits; ++k) {
      Node v = graph->variable("var.theta[" + std::to_string(l) + "][" + std::to_string(k) + "]");
      theta_var.push_back(v);
      params.push_back({v, {embed::ParamRole::Angle, 0, 0}, "var"});
    }
  }

  std::vector<Node> gamma;
  if (config.kind == ModelKind::FnnTeQpinn) {
    auto emb = embed::make_fnn_embedding(*graph, inputs.size(), config.fnn_hidden,
                                         layout.n_qubits, params);
    gamma = embed::fnn_forward(emb, inputs);
  } else {
    embed::AffineScaler scaler;
    scaler.bounds = problem.space;
    scaler.bounds.push_back({0.0, problem.t_max});
    const qmodel::CircuitLayout aux{layout.n_qubits,
                                    config.aux_layers == 0 ? layout.n_layers : config.aux_layers,
                                    layout.entangler};
    auto emb = embed::make_qnn_embedding(*graph, aux, scaler, params);
    gamma = embed::qnn_forward(emb, inputs);
  }
  Node u = qmodel::expectation_node(layout, gamma, theta_var);
  Model model(std::move(graph), std::move(inputs), u, std::move(params), config.kind);
  model.angles_ = std::move(gamma);
  model.theta_var_ = std::move(theta_var);
  model.layout_ = layout;
  return model;
}

}  // namespace qpinn::train
