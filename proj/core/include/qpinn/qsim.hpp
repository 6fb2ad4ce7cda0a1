#pragma once

// Dense statevector simulation restricted to the gates the models need:
// RY rotations, CNOT entanglers, and Pauli-Z readout.
//
// Basis convention: bit i of the amplitude index is the state of qubit i,
// so qubit 0 is the least significant bit.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qpinn::qsim {

inline constexpr std::size_t kMaxQubits = 24;

class StateVector {
 public:
  using Amplitude = std::complex<double>;

  /// |0...0> on n qubits, 1 <= n <= kMaxQubits.
  explicit StateVector(std::size_t num_qubits);
  /// Takes ownership of `amplitudes`; its size must be a power of two.
  explicit StateVector(std::vector<Amplitude> amplitudes);

  [[nodiscard]] std::size_t num_qubits() const { return num_qubits_; }
  [[nodiscard]] std::size_t size() const { return amps_.size(); }
  [[nodiscard]] std::span<const Amplitude> amplitudes() const { return amps_; }
  [[nodiscard]] std::span<Amplitude> amplitudes() { return amps_; }
  [[nodiscard]] double norm_squared() const;

  // In-place kernels (single owner).
  void ry(std::size_t qubit, double angle);
  void cnot(std::size_t control, std::size_t target);

 private:
  std::size_t num_qubits_;
  std::vector<Amplitude> amps_;
};

StateVector zero_state(std::size_t num_qubits);
StateVector apply_ry(StateVector state, std::size_t qubit, double angle);
StateVector apply_cnot(StateVector state, std::size_t control, std::size_t target);

/// <Z x Z x ... x Z> over all qubits.
double expect_z_all(const StateVector& state);
/// <Z_qubit>.
double expect_z(const StateVector& state, std::size_t qubit);

}  // namespace qpinn::qsim
