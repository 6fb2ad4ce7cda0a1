#include "qpinn/qmodel.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace qpinn::qmodel {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

std::int8_t canonical_quarter(int q) {
  int r = ((q % 4) + 4) % 4;
  return static_cast<std::int8_t>(r == 3 ? -1 : r);
}

void check_gamma(const CircuitLayout& layout, std::span<const double> gamma) {
  if (gamma.size() != layout.n_qubits) {
    throw std::invalid_argument("angle vector has " + std::to_string(gamma.size()) +
                                " entries, layout has " + std::to_string(layout.n_qubits) +
                                " qubits");
  }
}

void check_params(const CircuitLayout& layout, const VarParams& params) {
  if (params.n_layers() != layout.n_layers || params.n_qubits() != layout.n_qubits) {
    throw std::invalid_argument("variational parameter shape does not match layout");
  }
}

void check_observable(const CircuitLayout& layout, Observable obs) {
  if (obs.qubit >= static_cast<int>(layout.n_qubits)) {
    throw std::out_of_range("observable qubit out of range");
  }
}

std::size_t parity_mask(const CircuitLayout& layout, Observable obs) {
  return obs.qubit < 0 ? (std::size_t{1} << layout.n_qubits) - 1
                       : std::size_t{1} << static_cast<std::size_t>(obs.qubit);
}

// Real-amplitude kernels for the hot path.
void real_ry(std::vector<double>& psi, std::size_t qubit, double c, double s) {
  const std::size_t stride = std::size_t{1} << qubit;
  const std::size_t n = psi.size();
  for (std::size_t base = 0; base < n; base += 2 * stride) {
    for (std::size_t i = base; i < base + stride; ++i) {
      const double a0 = psi[i];
      const double a1 = psi[i + stride];
      psi[i] = c * a0 - s * a1;
      psi[i + stride] = s * a0 + c * a1;
    }
  }
}

// sum over pairs of (lambda1 * psi0 - lambda0 * psi1): 2 <lambda| dRY/dtheta RY^T |psi>
double real_ry_generator_dot(const std::vector<double>& lambda, const std::vector<double>& psi,
                             std::size_t qubit) {
  const std::size_t stride = std::size_t{1} << qubit;
  const std::size_t n = psi.size();
  double acc = 0.0;
  for (std::size_t base = 0; base < n; base += 2 * stride) {
    for (std::size_t i = base; i < base + stride; ++i) {
      acc += lambda[i + stride] * psi[i] - lambda[i] * psi[i + stride];
    }
  }
  return acc;
}

struct Scratch {
  std::vector<double> psi;
  std::vector<double> lambda;
  std::vector<double> tmp;
  std::vector<double> cos_half;
  std::vector<double> sin_half;
  std::vector<double> cached_angles;
  // forward states after each ansatz RY gate, for the adjoint sweep
  std::vector<double> snapshots;
  // basis permutation of one entangling layer: after[i] = before[perm[i]]
  std::vector<std::uint32_t> perm;
  std::vector<std::uint32_t> inv_perm;
  std::size_t perm_qubits = 0;
  Entangler perm_entangler = Entangler::Ring;
  bool perm_ready = false;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

constexpr std::size_t kSnapshotLimit = std::size_t{1} << 23;  // doubles

void prepare_permutation(const CircuitLayout& layout, Scratch& s) {
  if (s.perm_ready && s.perm_qubits == layout.n_qubits && s.perm_entangler == layout.entangler) {
    return;
  }
  const std::size_t dim = std::size_t{1} << layout.n_qubits;
  s.perm.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) s.perm[i] = static_cast<std::uint32_t>(i);
  std::vector<std::uint32_t> next(dim);
  for (auto [c, t] : layout.entangler_pairs()) {
    const std::size_t cmask = std::size_t{1} << c;
    const std::size_t tmask = std::size_t{1} << t;
    for (std::size_t i = 0; i < dim; ++i) next[i] = s.perm[(i & cmask) != 0 ? i ^ tmask : i];
    s.perm.swap(next);
  }
  s.inv_perm.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) s.inv_perm[s.perm[i]] = static_cast<std::uint32_t>(i);
  s.perm_qubits = layout.n_qubits;
  s.perm_entangler = layout.entangler;
  s.perm_ready = true;
}

void gather(std::vector<double>& psi, std::vector<double>& tmp, const std::vector<std::uint32_t>& idx) {
  tmp.resize(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) tmp[i] = psi[idx[i]];
  psi.swap(tmp);
}

void update_trig(std::span<const double> angles, Scratch& s) {
  if (s.cached_angles.size() != angles.size()) {
    s.cached_angles.assign(angles.size(), std::numeric_limits<double>::quiet_NaN());
    s.cos_half.resize(angles.size());
    s.sin_half.resize(angles.size());
  }
  for (std::size_t i = 0; i < angles.size(); ++i) {
    if (angles[i] == s.cached_angles[i]) continue;
    s.cached_angles[i] = angles[i];
    s.cos_half[i] = std::cos(0.5 * angles[i]);
    s.sin_half[i] = std::sin(0.5 * angles[i]);
  }
}

void prepare_product_state(std::vector<double>& psi, std::size_t n, const Scratch& s) {
  psi.assign(std::size_t{1} << n, 0.0);
  psi[0] = 1.0;
  for (std::size_t q = 0; q < n; ++q) {
    const double c = s.cos_half[q];
    const double sn = s.sin_half[q];
    const std::size_t half = std::size_t{1} << q;
    for (std::size_t k = 0; k < half; ++k) {
      psi[k | half] = psi[k] * sn;
      psi[k] *= c;
    }
  }
}

// Leaves the final state in s.psi. With `keep`, the state after every ansatz
// RY gate is stored in s.snapshots (gate-major).
void run_real_forward(const CircuitLayout& layout, std::span<const double> angles,
                      Scratch& s, bool keep) {
  const std::size_t n = layout.n_qubits;
  update_trig(angles, s);
  prepare_permutation(layout, s);
  prepare_product_state(s.psi, n, s);
  const std::size_t dim = s.psi.size();
  const bool entangle = !layout.entangler_pairs().empty();
  if (keep) s.snapshots.resize(layout.n_layers * n * dim);
  for (std::size_t l = 0; l < layout.n_layers; ++l) {
    for (std::size_t q = 0; q < n; ++q) {
      const std::size_t a = n + l * n + q;
      real_ry(s.psi, q, s.cos_half[a], s.sin_half[a]);
      if (keep) std::copy(s.psi.begin(), s.psi.end(), s.snapshots.begin() + static_cast<std::ptrdiff_t>((l * n + q) * dim));
    }
    if (entangle) gather(s.psi, s.tmp, s.perm);
  }
}

}  // namespace

std::string to_string(Entangler e) { return e == Entangler::Ring ? "ring" : "linear"; }

Entangler entangler_from_string(const std::string& s) {
  if (s == "ring") return Entangler::Ring;
  if (s == "linear") return Entangler::Linear;
  throw std::invalid_argument("unknown entangler '" + s + "' (expected ring|linear)");
}

void CircuitLayout::validate() const {
  if (n_qubits < 1 || n_qubits > qsim::kMaxQubits) {
    throw std::invalid_argument("circuit qubit count out of range");
  }
}

std::vector<std::pair<std::size_t, std::size_t>> CircuitLayout::entangler_pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (n_qubits < 2) return pairs;
  if (entangler == Entangler::Linear || n_qubits == 2) {
    for (std::size_t k = 0; k + 1 < n_qubits; ++k) pairs.emplace_back(k, k + 1);
  } else {
    for (std::size_t k = 0; k < n_qubits; ++k) pairs.emplace_back(k, (k + 1) % n_qubits);
  }
  return pairs;
}

VarParams::VarParams(const CircuitLayout& layout)
    : n_layers_(layout.n_layers),
      n_qubits_(layout.n_qubits),
      theta_(layout.num_variational(), 0.0) {}

VarParams::VarParams(const CircuitLayout& layout, std::vector<double> theta)
    : n_layers_(layout.n_layers), n_qubits_(layout.n_qubits), theta_(std::move(theta)) {
  if (theta_.size() != layout.num_variational()) {
    throw std::invalid_argument("variational parameter count does not match layout");
  }
  for (double v : theta_) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite variational angle");
  }
}

qsim::StateVector encode(const CircuitLayout& layout, std::span<const double> gamma) {
  layout.validate();
  check_gamma(layout, gamma);
  qsim::StateVector state(layout.n_qubits);
  for (std::size_t k = 0; k < layout.n_qubits; ++k) state.ry(k, gamma[k]);
  return state;
}

qsim::StateVector ansatz(qsim::StateVector state, const CircuitLayout& layout,
                         const VarParams& params) {
  layout.validate();
  check_params(layout, params);
  if (state.num_qubits() != layout.n_qubits) {
    throw std::invalid_argument("state qubit count does not match layout");
  }
  const auto pairs = layout.entangler_pairs();
  for (std::size_t l = 0; l < layout.n_layers; ++l) {
    for (std::size_t q = 0; q < layout.n_qubits; ++q) state.ry(q, params(l, q));
    for (auto [c, t] : pairs) state.cnot(c, t);
  }
  return state;
}

double measure(const qsim::StateVector& state, Observable observable) {
  return observable.qubit < 0 ? qsim::expect_z_all(state)
                              : qsim::expect_z(state, static_cast<std::size_t>(observable.qubit));
}

double expectation(const CircuitLayout& layout, std::span<const double> gamma,
                   const VarParams& params, Observable observable) {
  check_observable(layout, observable);
  return measure(ansatz(encode(layout, gamma), layout, params), observable);
}

namespace {

double shifted_expectation(const CircuitLayout& layout, std::span<const double> gamma,
                           const VarParams& params, Observable obs,
                           std::span<const std::pair<AngleAddress, double>> shifts) {
  AngleVector g(gamma.begin(), gamma.end());
  VarParams p = params;
  for (const auto& [addr, delta] : shifts) {
    if (addr.kind == AngleAddress::Kind::Encoding) {
      if (addr.qubit >= g.size()) throw std::out_of_range("encoding angle address out of range");
      g[addr.qubit] += delta;
    } else {
      if (addr.layer >= p.n_layers() || addr.qubit >= p.n_qubits()) {
        throw std::out_of_range("variational angle address out of range");
      }
      p(addr.layer, addr.qubit) += delta;
    }
  }
  return expectation(layout, g, p, obs);
}

}  // namespace

double shift_first(const CircuitLayout& layout, std::span<const double> gamma,
                   const VarParams& params, AngleAddress which, Observable observable) {
  const std::pair<AngleAddress, double> plus[] = {{which, kHalfPi}};
  const std::pair<AngleAddress, double> minus[] = {{which, -kHalfPi}};
  return 0.5 * (shifted_expectation(layout, gamma, params, observable, plus) -
                shifted_expectation(layout, gamma, params, observable, minus));
}

double shift_second(const CircuitLayout& layout, std::span<const double> gamma,
                    const VarParams& params, AngleAddress which, Observable observable) {
  const std::pair<AngleAddress, double> plus[] = {{which, std::numbers::pi}};
  const std::pair<AngleAddress, double> none[] = {{which, 0.0}};
  return 0.5 * (shifted_expectation(layout, gamma, params, observable, plus) -
                shifted_expectation(layout, gamma, params, observable, none));
}

double shift_second_nested(const CircuitLayout& layout, std::span<const double> gamma,
                           const VarParams& params, AngleAddress which, Observable observable) {
  double acc = 0.0;
  for (double s1 : {kHalfPi, -kHalfPi}) {
    for (double s2 : {kHalfPi, -kHalfPi}) {
      const std::pair<AngleAddress, double> shift[] = {{which, s1}, {which, s2}};
      const double sign = (s1 > 0) == (s2 > 0) ? 1.0 : -1.0;
      acc += sign * shifted_expectation(layout, gamma, params, observable, shift);
    }
  }
  return 0.25 * acc;
}

double shift_mixed(const CircuitLayout& layout, std::span<const double> gamma,
                   const VarParams& params, AngleAddress a, AngleAddress b,
                   Observable observable) {
  if (a == b) throw std::invalid_argument("shift_mixed: addresses coincide, use shift_second");
  double acc = 0.0;
  for (double sa : {kHalfPi, -kHalfPi}) {
    for (double sb : {kHalfPi, -kHalfPi}) {
      const std::pair<AngleAddress, double> shift[] = {{a, sa}, {b, sb}};
      const double sign = (sa > 0) == (sb > 0) ? 1.0 : -1.0;
      acc += sign * shifted_expectation(layout, gamma, params, observable, shift);
    }
  }
  return 0.25 * acc;
}

double evaluate_angles(const CircuitLayout& layout, Observable observable,
                       std::span<const double> angles) {
  if (angles.size() != layout.num_angles()) {
    throw std::invalid_argument("flat angle count does not match layout");
  }
  Scratch& s = scratch();
  run_real_forward(layout, angles, s, false);
  const std::size_t mask = parity_mask(layout, observable);
  double e = 0.0;
  for (std::size_t k = 0; k < s.psi.size(); ++k) {
    const double p = s.psi[k] * s.psi[k];
    e += (std::popcount(k & mask) & 1U) != 0 ? -p : p;
  }
  return e;
}

double evaluate_angles_with_gradient(const CircuitLayout& layout, Observable observable,
                                     std::span<const double> angles, std::span<double> grad) {
  if (angles.size() != layout.num_angles() || grad.size() != angles.size()) {
    throw std::invalid_argument("flat angle/gradient count does not match layout");
  }
  Scratch& s = scratch();
  const std::size_t n = layout.n_qubits;
  const std::size_t dim = std::size_t{1} << n;
  const bool keep = layout.n_layers * n * dim <= kSnapshotLimit;
  run_real_forward(layout, angles, s, keep);
  const std::size_t mask = parity_mask(layout, observable);
  s.lambda.resize(dim);
  double e = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double sign = (std::popcount(k & mask) & 1U) != 0 ? -1.0 : 1.0;
    s.lambda[k] = sign * s.psi[k];
    e += s.lambda[k] * s.psi[k];
  }
  const bool entangle = !layout.entangler_pairs().empty();
  for (std::size_t l = layout.n_layers; l-- > 0;) {
    if (entangle) {
      gather(s.lambda, s.tmp, s.inv_perm);
      if (!keep) gather(s.psi, s.tmp, s.inv_perm);
    }
    for (std::size_t q = n; q-- > 0;) {
      const std::size_t a = n + l * n + q;
      if (keep) {
        const double* snap = s.snapshots.data() + (l * n + q) * dim;
        std::copy(snap, snap + dim, s.psi.begin());
      }
      grad[a] = real_ry_generator_dot(s.lambda, s.psi, q);
      real_ry(s.lambda, q, s.cos_half[a], -s.sin_half[a]);
      if (!keep) real_ry(s.psi, q, s.cos_half[a], -s.sin_half[a]);
    }
  }
  if (keep) prepare_product_state(s.psi, n, s);
  for (std::size_t q = n; q-- > 0;) {
    grad[q] = real_ry_generator_dot(s.lambda, s.psi, q);
    if (q > 0) {
      real_ry(s.psi, q, s.cos_half[q], -s.sin_half[q]);
      real_ry(s.lambda, q, s.cos_half[q], -s.sin_half[q]);
    }
  }
  return e;
}

ExpectationPrimitive::ExpectationPrimitive(CircuitLayout layout, Observable observable,
                                           std::vector<std::int8_t> quarter_turns)
    : layout_(layout), observable_(observable), quarter_turns_(std::move(quarter_turns)) {
  layout_.validate();
  check_observable(layout_, observable_);
  if (quarter_turns_.size() != layout_.num_angles()) {
    throw std::invalid_argument("ExpectationPrimitive: offset count does not match layout");
  }
  for (auto& q : quarter_turns_) q = canonical_quarter(q);
}

std::string ExpectationPrimitive::name() const {
  std::string s = observable_.qubit < 0 ? "<Z..Z>" : "<Z" + std::to_string(observable_.qubit) + ">";
  bool shifted = false;
  for (auto q : quarter_turns_) shifted = shifted || q != 0;
  if (shifted) {
    s += " [";
    for (auto q : quarter_turns_) s += std::to_string(q) + " ";
    s.back() = ']';
  }
  return s;
}

void ExpectationPrimitive::shifted_angles(std::span<const double> args,
                                          std::vector<double>& out) const {
  out.resize(args.size());
  for (std::size_t i = 0; i < args.size(); ++i) out[i] = args[i] + quarter_turns_[i] * kHalfPi;
}

double ExpectationPrimitive::value(std::span<const double> args) const {
  thread_local std::vector<double> angles;
  shifted_angles(args, angles);
  return evaluate_angles(layout_, observable_, angles);
}

double ExpectationPrimitive::value_and_gradient(std::span<const double> args,
                                                std::span<double> grad) const {
  thread_local std::vector<double> angles;
  shifted_angles(args, angles);
  return evaluate_angles_with_gradient(layout_, observable_, angles, grad);
}

expr::PrimitiveRef ExpectationPrimitive::shifted(std::size_t index, int quarter_turns) const {
  auto q = quarter_turns_;
  q.at(index) = canonical_quarter(q[index] + quarter_turns);
  return std::make_shared<ExpectationPrimitive>(layout_, observable_, std::move(q));
}

expr::Node ExpectationPrimitive::partial(std::size_t index,
                                         std::span<const expr::Node> children) const {
  expr::Graph& g = *children[0].graph();
  expr::Node plus = g.call(shifted(index, 1), children);
  expr::Node minus = g.call(shifted(index, -1), children);
  return g.mul(g.constant(0.5), g.add(plus, g.neg(minus)));
}

std::size_t ExpectationPrimitive::hash() const {
  std::size_t h = layout_.n_qubits * 1315423911u + layout_.n_layers * 2654435761u;
  h ^= static_cast<std::size_t>(layout_.entangler) + 0x9e3779b9 + (h << 6) + (h >> 2);
  h ^= static_cast<std::size_t>(observable_.qubit + 7) + 0x9e3779b9 + (h << 6) + (h >> 2);
  for (auto q : quarter_turns_) h = h * 31 + static_cast<std::size_t>(q + 2);
  return h;
}

bool ExpectationPrimitive::equals(const Primitive& other) const {
  const auto* o = dynamic_cast<const ExpectationPrimitive*>(&other);
  return o != nullptr && o->layout_ == layout_ && o->observable_ == observable_ &&
         o->quarter_turns_ == quarter_turns_;
}

expr::Node expectation_node(const CircuitLayout& layout, std::span<const expr::Node> gamma,
                            std::span<const expr::Node> theta, Observable observable) {
  layout.validate();
  if (gamma.size() != layout.n_qubits || theta.size() != layout.num_variational()) {
    throw std::invalid_argument("expectation_node: node shapes do not match layout");
  }
  std::vector<expr::Node> children(gamma.begin(), gamma.end());
  children.insert(children.end(), theta.begin(), theta.end());
  auto prim = std::make_shared<ExpectationPrimitive>(
      layout, observable, std::vector<std::int8_t>(layout.num_angles(), 0));
  return children.front().graph()->call(prim, children);
}

}  // namespace qpinn::qmodel
