#include "qpinn/qsim.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qpinn::qsim {

namespace {

void check_qubit_count(std::size_t n) {
  if (n < 1 || n > kMaxQubits) {
    throw std::invalid_argument("qubit count " + std::to_string(n) + " outside [1, " +
                                std::to_string(kMaxQubits) + "]");
  }
}

void check_index(const StateVector& s, std::size_t qubit) {
  if (qubit >= s.num_qubits()) {
    throw std::out_of_range("qubit index " + std::to_string(qubit) + " out of range for " +
                            std::to_string(s.num_qubits()) + " qubits");
  }
}

}  // namespace

StateVector::StateVector(std::size_t num_qubits) : num_qubits_(num_qubits) {
  check_qubit_count(num_qubits);
  amps_.assign(std::size_t{1} << num_qubits, Amplitude{0.0, 0.0});
  amps_[0] = 1.0;
}

StateVector::StateVector(std::vector<Amplitude> amplitudes) : amps_(std::move(amplitudes)) {
  if (amps_.empty() || !std::has_single_bit(amps_.size())) {
    throw std::invalid_argument("amplitude count must be a power of two");
  }
  num_qubits_ = static_cast<std::size_t>(std::countr_zero(amps_.size()));
  check_qubit_count(num_qubits_);
}

double StateVector::norm_squared() const {
  double s = 0.0;
  for (const auto& a : amps_) s += std::norm(a);
  return s;
}

void StateVector::ry(std::size_t qubit, double angle) {
  check_index(*this, qubit);
  const double c = std::cos(0.5 * angle);
  const double s = std::sin(0.5 * angle);
  const std::size_t stride = std::size_t{1} << qubit;
  const std::size_t n = amps_.size();
  for (std::size_t base = 0; base < n; base += 2 * stride) {
    for (std::size_t i = base; i < base + stride; ++i) {
      const Amplitude a0 = amps_[i];
      const Amplitude a1 = amps_[i + stride];
      amps_[i] = c * a0 - s * a1;
      amps_[i + stride] = s * a0 + c * a1;
    }
  }
}

void StateVector::cnot(std::size_t control, std::size_t target) {
  check_index(*this, control);
  check_index(*this, target);
  if (control == target) throw std::invalid_argument("CNOT control and target coincide");
  const std::size_t cmask = std::size_t{1} << control;
  const std::size_t tmask = std::size_t{1} << target;
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    // visit each swapped pair once, from its target-bit-0 member
    if ((i & cmask) != 0 && (i & tmask) == 0) std::swap(amps_[i], amps_[i | tmask]);
  }
}

StateVector zero_state(std::size_t num_qubits) { return StateVector(num_qubits); }

StateVector apply_ry(StateVector state, std::size_t qubit, double angle) {
  state.ry(qubit, angle);
  return state;
}

StateVector apply_cnot(StateVector state, std::size_t control, std::size_t target) {
  state.cnot(control, target);
  return state;
}

double expect_z_all(const StateVector& state) {
  double e = 0.0;
  const auto amps = state.amplitudes();
  for (std::size_t k = 0; k < amps.size(); ++k) {
    const double p = std::norm(amps[k]);
    e += (std::popcount(k) & 1U) != 0 ? -p : p;
  }
  return e;
}

double expect_z(const StateVector& state, std::size_t qubit) {
  check_index(state, qubit);
  const std::size_t mask = std::size_t{1} << qubit;
  double e = 0.0;
  const auto amps = state.amplitudes();
  for (std::size_t k = 0; k < amps.size(); ++k) {
    const double p = std::norm(amps[k]);
    e += (k & mask) != 0 ? -p : p;
  }
  return e;
}

}  // namespace qpinn::qsim
