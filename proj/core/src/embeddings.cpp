#include "qpinn/embeddings.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace qpinn::embed {

using expr::Node;

std::vector<double> init_params(std::span<const ParamInfo> params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    switch (p.role) {
      case ParamRole::Bias: out.push_back(0.0); break;
      case ParamRole::Weight: {
        const double limit = std::sqrt(6.0 / static_cast<double>(p.fan_in + p.fan_out));
        out.push_back(std::uniform_real_distribution<double>(-limit, limit)(rng));
        break;
      }
      case ParamRole::Angle: {
        constexpr double limit = std::numbers::pi / 4.0;
        out.push_back(std::uniform_real_distribution<double>(-limit, limit)(rng));
        break;
      }
    }
  }
  return out;
}

std::vector<double> init_params(std::span<const Parameter> params, std::uint64_t seed) {
  std::vector<ParamInfo> info;
  info.reserve(params.size());
  for (const auto& p : params) info.push_back(p.info);
  return init_params(info, seed);
}

void AffineScaler::validate() const {
  for (const auto& b : bounds) {
    if (!(b.hi > b.lo)) throw std::invalid_argument("AffineScaler: bounds need hi > lo");
  }
}

double AffineScaler::apply(double v, std::size_t dim) const {
  const auto& b = bounds.at(dim);
  return std::numbers::pi * (2.0 * (v - b.lo) / (b.hi - b.lo) - 1.0);
}

Node AffineScaler::apply(Node v, std::size_t dim) const {
  const auto& b = bounds.at(dim);
  const double scale = 2.0 * std::numbers::pi / (b.hi - b.lo);
  return v * scale + (-std::numbers::pi - b.lo * scale);
}

Mlp make_mlp(expr::Graph& graph, std::span<const std::size_t> layer_sizes, bool tanh_output,
             const std::string& prefix, const std::string& group, std::vector<Parameter>& params) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("MLP needs at least input and output sizes");
  Mlp mlp;
  mlp.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  mlp.tanh_output = tanh_output;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    DenseLayer layer;
    layer.in = layer_sizes[l];
    layer.out = layer_sizes[l + 1];
    if (layer.in == 0 || layer.out == 0) throw std::invalid_argument("MLP layer size must be positive");
    const std::string base = prefix + ".L" + std::to_string(l);
    for (std::size_t o = 0; o < layer.out; ++o) {
      for (std::size_t i = 0; i < layer.in; ++i) {
        Node w = graph.variable(base + ".W[" + std::to_string(o) + "][" + std::to_string(i) + "]");
        layer.weights.push_back(w);
        params.push_back({w, {ParamRole::Weight, layer.in, layer.out}, group});
      }
    }
    for (std::size_t o = 0; o < layer.out; ++o) {
      Node b = graph.variable(base + ".b[" + std::to_string(o) + "]");
      layer.biases.push_back(b);
      params.push_back({b, {ParamRole::Bias, layer.in, layer.out}, group});
    }
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

std::vector<Node> mlp_forward(const Mlp& mlp, std::span<const Node> inputs) {
  if (inputs.size() != mlp.layer_sizes.front()) {
    throw std::invalid_argument("MLP expects " + std::to_string(mlp.layer_sizes.front()) +
                                " inputs, got " + std::to_string(inputs.size()));
  }
  std::vector<Node> h(inputs.begin(), inputs.end());
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& layer = mlp.layers[l];
    const bool last = l + 1 == mlp.layers.size();
    std::vector<Node> next;
    next.reserve(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      Node z = layer.biases[o];
      for (std::size_t i = 0; i < layer.in; ++i) z = z + layer.weights[o * layer.in + i] * h[i];
      next.push_back(!last || mlp.tanh_output ? tanh(z) : z);
    }
    h = std::move(next);
  }
  return h;
}

FnnEmbedding make_fnn_embedding(expr::Graph& graph, std::size_t d_in,
                                std::span<const std::size_t> hidden, std::size_t n_qubits,
                                std::vector<Parameter>& params) {
  std::vector<std::size_t> sizes{d_in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(n_qubits);
  FnnEmbedding emb;
  emb.net = make_mlp(graph, sizes, /*tanh_output=*/true, "emb", "emb", params);
  emb.output_scale = std::numbers::pi;
  return emb;
}

std::vector<Node> fnn_forward(const FnnEmbedding& emb, std::span<const Node> inputs) {
  auto out = mlp_forward(emb.net, inputs);
  for (auto& n : out) n = n * emb.output_scale;
  return out;
}

QnnEmbedding make_qnn_embedding(expr::Graph& graph, const qmodel::CircuitLayout& aux_layout,
                                AffineScaler input_map, std::vector<Parameter>& params) {
  aux_layout.validate();
  input_map.validate();
  QnnEmbedding emb{aux_layout, {}, std::move(input_map)};
  for (std::size_t l = 0; l < aux_layout.n_layers; ++l) {
    for (std::size_t k = 0; k < aux_layout.n_qubits; ++k) {
      Node v = graph.variable("emb.theta[" + std::to_string(l) + "][" + std::to_string(k) + "]");
      emb.theta.push_back(v);
      params.push_back({v, {ParamRole::Angle, 0, 0}, "emb"});
    }
  }
  return emb;
}

std::vector<Node> qnn_forward(const QnnEmbedding& emb, std::span<const Node> inputs) {
  if (inputs.size() != emb.input_map.bounds.size()) {
    throw std::invalid_argument("QNN embedding input count does not match its scaler");
  }
  const auto encoded = direct_forward(emb.input_map, inputs, emb.aux_layout.n_qubits);
  std::vector<Node> angles;
  angles.reserve(emb.aux_layout.n_qubits);
  for (std::size_t k = 0; k < emb.aux_layout.n_qubits; ++k) {
    Node z = qmodel::expectation_node(emb.aux_layout, encoded, emb.theta, qmodel::Observable::single(k));
    angles.push_back(z * std::numbers::pi);
  }
  return angles;
}

std::vector<Node> direct_forward(const AffineScaler& scaler, std::span<const Node> inputs,
                                 std::size_t n_qubits) {
  if (inputs.size() != scaler.bounds.size()) {
    throw std::invalid_argument("direct embedding input count does not match its scaler");
  }
  if (n_qubits < inputs.size()) {
    throw std::invalid_argument("direct embedding needs at least one qubit per input");
  }
  std::vector<Node> scaled;
  for (std::size_t d = 0; d < inputs.size(); ++d) scaled.push_back(scaler.apply(inputs[d], d));
  std::vector<Node> out;
  for (std::size_t k = 0; k < n_qubits; ++k) out.push_back(scaled[k % inputs.size()]);
  return out;
}

}  // namespace qpinn::embed
