#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qpinn/embeddings.hpp"
#include "qpinn/exprgraph.hpp"
#include "qpinn/pde.hpp"
#include "qpinn/qmodel.hpp"

namespace qpinn::train {

enum class ModelKind { Pinn, FnnTeQpinn, QnnTeQpinn };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct ModelConfig {
  ModelKind kind = ModelKind::FnnTeQpinn;
  std::size_t n_qubits = 4;
  std::size_t n_layers = 5;
  qmodel::Entangler entangler = qmodel::Entangler::Ring;
  std::vector<std::size_t> fnn_hidden{10, 10};
  std::vector<std::size_t> pinn_hidden{50, 50, 50, 50};
  std::size_t aux_layers = 0;  // 0: same depth as the main circuit

  void validate() const;
};

/// A scalar field u(x[, y], t; params) expressed as a graph.
///
/// Parameter order is the flattening used by optimizers and checkpoints:
/// for quantum kinds the ansatz angles come first, then the embedding.
class Model {
 public:
  Model(std::unique_ptr<expr::Graph> graph, std::vector<expr::Node> inputs, expr::Node output,
        std::vector<embed::Parameter> parameters, std::optional<ModelKind> kind = std::nullopt);

  [[nodiscard]] expr::Graph& graph() const { return *graph_; }
  [[nodiscard]] std::span<const expr::Node> inputs() const { return inputs_; }
  [[nodiscard]] expr::Node output() const { return output_; }
  [[nodiscard]] std::span<const embed::Parameter> parameters() const { return params_; }
  [[nodiscard]] std::size_t num_parameters() const { return params_.size(); }
  [[nodiscard]] std::optional<ModelKind> kind() const { return kind_; }
  /// Quantum models read out a Pauli expectation, so |u| <= 1.
  [[nodiscard]] bool bounded() const;

  /// Encoding angle nodes (quantum kinds only).
  [[nodiscard]] std::span<const expr::Node> angles() const { return angles_; }
  [[nodiscard]] const std::optional<qmodel::CircuitLayout>& layout() const { return layout_; }
  [[nodiscard]] std::span<const expr::Node> variational() const { return theta_var_; }

  [[nodiscard]] std::vector<double> initial_parameters(std::uint64_t seed) const;
  /// Stable string describing the parameter layout; checkpoints store its hash.
  [[nodiscard]] std::string shape_signature() const;

 private:
  friend Model build_model(const ModelConfig&, const pde::HeatProblem&);

  std::unique_ptr<expr::Graph> graph_;
  std::vector<expr::Node> inputs_;
  expr::Node output_;
  std::vector<embed::Parameter> params_;
  std::optional<ModelKind> kind_;
  std::vector<expr::Node> angles_;
  std::vector<expr::Node> theta_var_;
  std::optional<qmodel::CircuitLayout> layout_;
};

Model build_model(const ModelConfig& config, const pde::HeatProblem& problem);

/// Input variable nodes named x[, y], t in a fresh graph.
std::vector<expr::Node> make_inputs(expr::Graph& graph, std::size_t dim);

}  // namespace qpinn::train
