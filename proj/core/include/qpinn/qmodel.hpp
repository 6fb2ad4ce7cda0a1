#pragma once

// Encoding unitary, layered hardware-efficient ansatz, Pauli-Z readout, and
// the bridge that exposes the circuit expectation as a differentiable graph
// primitive.
//
// Angle ordering used everywhere a flat angle list appears: the n encoding
// angles first, then the ansatz angles layer by layer, qubit-minor.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qpinn/exprgraph.hpp"
#include "qpinn/qsim.hpp"

namespace qpinn::qmodel {

enum class Entangler { Ring, Linear };

std::string to_string(Entangler e);
Entangler entangler_from_string(const std::string& s);

struct CircuitLayout {
  std::size_t n_qubits = 1;
  std::size_t n_layers = 1;
  Entangler entangler = Entangler::Ring;

  /// n_layers == 0 is accepted here and means encoding only.
  void validate() const;
  [[nodiscard]] std::size_t num_variational() const { return n_qubits * n_layers; }
  [[nodiscard]] std::size_t num_angles() const { return n_qubits + num_variational(); }
  /// CNOT (control, target) pairs applied after each rotation layer.
  [[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> entangler_pairs() const;

  friend bool operator==(const CircuitLayout&, const CircuitLayout&) = default;
};

/// Trainable ansatz angles, theta(layer, qubit).
class VarParams {
 public:
  VarParams() = default;
  explicit VarParams(const CircuitLayout& layout);
  VarParams(const CircuitLayout& layout, std::vector<double> theta);

  [[nodiscard]] std::size_t n_layers() const { return n_layers_; }
  [[nodiscard]] std::size_t n_qubits() const { return n_qubits_; }
  double& operator()(std::size_t layer, std::size_t qubit) { return theta_[layer * n_qubits_ + qubit]; }
  double operator()(std::size_t layer, std::size_t qubit) const {
    return theta_[layer * n_qubits_ + qubit];
  }
  [[nodiscard]] std::span<const double> flat() const { return theta_; }

 private:
  std::size_t n_layers_ = 0;
  std::size_t n_qubits_ = 0;
  std::vector<double> theta_;
};

using AngleVector = std::vector<double>;

/// Z on every qubit (qubit < 0) or Z on a single qubit.
struct Observable {
  int qubit = -1;
  static Observable all() { return {}; }
  static Observable single(std::size_t q) { return {static_cast<int>(q)}; }
  friend bool operator==(const Observable&, const Observable&) = default;
};

struct AngleAddress {
  enum class Kind { Encoding, Variational };
  Kind kind = Kind::Encoding;
  std::size_t layer = 0;
  std::size_t qubit = 0;

  static AngleAddress encoding(std::size_t qubit) { return {Kind::Encoding, 0, qubit}; }
  static AngleAddress variational(std::size_t layer, std::size_t qubit) {
    return {Kind::Variational, layer, qubit};
  }
  friend bool operator==(const AngleAddress&, const AngleAddress&) = default;
};

qsim::StateVector encode(const CircuitLayout& layout, std::span<const double> gamma);
qsim::StateVector ansatz(qsim::StateVector state, const CircuitLayout& layout,
                         const VarParams& params);
double measure(const qsim::StateVector& state, Observable observable);

double expectation(const CircuitLayout& layout, std::span<const double> gamma,
                   const VarParams& params, Observable observable = Observable::all());

/// Exact first partial via (E(a + pi/2) - E(a - pi/2)) / 2.
double shift_first(const CircuitLayout& layout, std::span<const double> gamma,
                   const VarParams& params, AngleAddress which,
                   Observable observable = Observable::all());
/// Exact second partial via (E(a + pi) - E(a)) / 2.
double shift_second(const CircuitLayout& layout, std::span<const double> gamma,
                    const VarParams& params, AngleAddress which,
                    Observable observable = Observable::all());
/// Second partial by nesting the first-order rule (four evaluations).
double shift_second_nested(const CircuitLayout& layout, std::span<const double> gamma,
                           const VarParams& params, AngleAddress which,
                           Observable observable = Observable::all());
/// Mixed partial via the four-point +-pi/2 rule; addresses must differ.
double shift_mixed(const CircuitLayout& layout, std::span<const double> gamma,
                   const VarParams& params, AngleAddress a, AngleAddress b,
                   Observable observable = Observable::all());

/// Flat-angle evaluation on a real-amplitude kernel (RY and CNOT keep
/// amplitudes real). Agrees with `expectation` to rounding.
double evaluate_angles(const CircuitLayout& layout, Observable observable,
                       std::span<const double> angles);
/// Same value plus the gradient w.r.t. every angle by a single adjoint sweep.
double evaluate_angles_with_gradient(const CircuitLayout& layout, Observable observable,
                                     std::span<const double> angles, std::span<double> grad);

/// Graph primitive for the circuit expectation. Arguments are the flat angle
/// list; each argument carries a fixed offset of k * pi/2 (k mod 4) so that
/// shift-rule partials are new instances of the same primitive.
class ExpectationPrimitive final : public expr::Primitive {
 public:
  ExpectationPrimitive(CircuitLayout layout, Observable observable,
                       std::vector<std::int8_t> quarter_turns);

  std::string name() const override;
  std::size_t arity() const override { return quarter_turns_.size(); }
  double value(std::span<const double> args) const override;
  expr::Node partial(std::size_t index, std::span<const expr::Node> children) const override;
  double value_and_gradient(std::span<const double> args, std::span<double> grad) const override;
  bool has_numeric_gradient() const override { return true; }
  std::size_t hash() const override;
  bool equals(const Primitive& other) const override;

  [[nodiscard]] const CircuitLayout& layout() const { return layout_; }
  [[nodiscard]] std::span<const std::int8_t> quarter_turns() const { return quarter_turns_; }
  [[nodiscard]] expr::PrimitiveRef shifted(std::size_t index, int quarter_turns) const;

 private:
  void shifted_angles(std::span<const double> args, std::vector<double>& out) const;

  CircuitLayout layout_;
  Observable observable_;
  std::vector<std::int8_t> quarter_turns_;
};

/// Graph node whose value is `expectation` of the given angle nodes. `theta`
/// is row-major [n_layers x n_qubits].
expr::Node expectation_node(const CircuitLayout& layout, std::span<const expr::Node> gamma,
                            std::span<const expr::Node> theta,
                            Observable observable = Observable::all());

}  // namespace qpinn::qmodel
