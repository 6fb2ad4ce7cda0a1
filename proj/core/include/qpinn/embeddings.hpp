#pragma once

// Maps spatiotemporal inputs to the encoding angle vector. Every embedding is
// built from graph nodes so that input derivatives (for residuals) and
// parameter derivatives (for training) flow through it.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qpinn/exprgraph.hpp"
#include "qpinn/pde.hpp"
#include "qpinn/qmodel.hpp"

namespace qpinn::embed {

enum class ParamRole { Weight, Bias, Angle };

struct ParamInfo {
  ParamRole role = ParamRole::Angle;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
};

/// A trainable variable plus what its initializer needs to know.
struct Parameter {
  expr::Node variable;
  ParamInfo info;
  std::string group;  // "var", "emb" or "mlp"
};

/// Glorot-uniform weights, zero biases, angles uniform in (-pi/4, pi/4).
/// Draws happen in parameter order from a single seeded engine.
std::vector<double> init_params(std::span<const ParamInfo> params, std::uint64_t seed);
std::vector<double> init_params(std::span<const Parameter> params, std::uint64_t seed);

/// v -> pi * (2 (v - lo) / (hi - lo) - 1), mapping each domain onto [-pi, pi].
struct AffineScaler {
  std::vector<pde::Interval> bounds;

  void validate() const;
  [[nodiscard]] double apply(double v, std::size_t dim) const;
  [[nodiscard]] expr::Node apply(expr::Node v, std::size_t dim) const;
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<expr::Node> weights;  // row-major [out x in]
  std::vector<expr::Node> biases;
};

/// Dense network; tanh on hidden layers, optional tanh on the output layer.
struct Mlp {
  std::vector<std::size_t> layer_sizes;
  std::vector<DenseLayer> layers;
  bool tanh_output = false;
};

Mlp make_mlp(expr::Graph& graph, std::span<const std::size_t> layer_sizes, bool tanh_output,
             const std::string& prefix, const std::string& group, std::vector<Parameter>& params);
std::vector<expr::Node> mlp_forward(const Mlp& mlp, std::span<const expr::Node> inputs);

struct FnnEmbedding {
  Mlp net;
  double output_scale = 0.0;  // pi
};

/// Layer sizes [d_in, hidden..., n_qubits], tanh everywhere, output scaled by pi.
FnnEmbedding make_fnn_embedding(expr::Graph& graph, std::size_t d_in,
                                std::span<const std::size_t> hidden, std::size_t n_qubits,
                                std::vector<Parameter>& params);
std::vector<expr::Node> fnn_forward(const FnnEmbedding& emb, std::span<const expr::Node> inputs);

struct QnnEmbedding {
  qmodel::CircuitLayout aux_layout;
  std::vector<expr::Node> theta;  // row-major [aux layers x n_qubits]
  AffineScaler input_map;
};

QnnEmbedding make_qnn_embedding(expr::Graph& graph, const qmodel::CircuitLayout& aux_layout,
                                AffineScaler input_map, std::vector<Parameter>& params);
/// Scaled inputs go cyclically onto the aux register (qubit k gets input
/// k mod d_in); angle k is pi * <Z_k> after the aux ansatz.
std::vector<expr::Node> qnn_forward(const QnnEmbedding& emb, std::span<const expr::Node> inputs);

/// Non-trainable baseline: angle k = scaled input (k mod d_in).
std::vector<expr::Node> direct_forward(const AffineScaler& scaler,
                                       std::span<const expr::Node> inputs, std::size_t n_qubits);

}  // namespace qpinn::embed
