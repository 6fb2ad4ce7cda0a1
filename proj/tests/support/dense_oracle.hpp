#pragma once

// Independent dense-matrix circuit oracle: builds the full 2^n x 2^n unitary
// of each gate by Kronecker products and multiplies matrices. Slow, simple,
// and shares no code with the statevector kernels.

#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

namespace oracle_dense {

using C = std::complex<double>;

struct Matrix {
  std::size_t n = 0;  // dimension
  std::vector<C> a;
  explicit Matrix(std::size_t dim) : n(dim), a(dim * dim) {}
  C& operator()(std::size_t r, std::size_t c) { return a[r * n + c]; }
  C operator()(std::size_t r, std::size_t c) const { return a[r * n + c]; }
  static Matrix identity(std::size_t dim) {
    Matrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Matrix multiply(const Matrix& x, const Matrix& y) {
  Matrix out(x.n);
  for (std::size_t i = 0; i < x.n; ++i) {
    for (std::size_t k = 0; k < x.n; ++k) {
      const C v = x(i, k);
      if (v == C(0.0)) continue;
      for (std::size_t j = 0; j < x.n; ++j) out(i, j) += v * y(k, j);
    }
  }
  return out;
}

inline Matrix kron(const Matrix& x, const Matrix& y) {
  Matrix out(x.n * y.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t j = 0; j < x.n; ++j)
      for (std::size_t k = 0; k < y.n; ++k)
        for (std::size_t l = 0; l < y.n; ++l) out(i * y.n + k, j * y.n + l) = x(i, j) * y(k, l);
  return out;
}

// Qubit 0 is the least significant bit, so it is the rightmost factor.
inline Matrix single_qubit(const Matrix& g, std::size_t qubit, std::size_t n) {
  Matrix out = Matrix::identity(1);
  for (std::size_t q = n; q-- > 0;) out = kron(out, q == qubit ? g : Matrix::identity(2));
  return out;
}

inline Matrix ry(double theta, std::size_t qubit, std::size_t n) {
  Matrix g(2);
  g(0, 0) = std::cos(theta / 2);
  g(0, 1) = -std::sin(theta / 2);
  g(1, 0) = std::sin(theta / 2);
  g(1, 1) = std::cos(theta / 2);
  return single_qubit(g, qubit, n);
}

// |c><c| projector form: P0(c) x I + P1(c) x X(t)
inline Matrix cnot(std::size_t control, std::size_t target, std::size_t n) {
  Matrix p0(2), p1(2), x(2);
  p0(0, 0) = 1.0;
  p1(1, 1) = 1.0;
  x(0, 1) = 1.0;
  x(1, 0) = 1.0;
  Matrix a = single_qubit(p0, control, n);
  Matrix b = multiply(single_qubit(p1, control, n), single_qubit(x, target, n));
  for (std::size_t i = 0; i < a.a.size(); ++i) a.a[i] += b.a[i];
  return a;
}

inline Matrix z_all(std::size_t n) {
  Matrix z(2);
  z(0, 0) = 1.0;
  z(1, 1) = -1.0;
  Matrix out = Matrix::identity(1);
  for (std::size_t q = 0; q < n; ++q) out = kron(out, z);
  return out;
}

inline std::vector<C> apply_matrix(const Matrix& m, const std::vector<C>& v) {
  std::vector<C> out(m.n);
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t j = 0; j < m.n; ++j) out[i] += m(i, j) * v[j];
  return out;
}

inline double expectation(const Matrix& obs, const std::vector<C>& psi) {
  const auto o = apply_matrix(obs, psi);
  C s = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) s += std::conj(psi[i]) * o[i];
  return s.real();
}

/// <Z...Z> of the encode + layered RY/CNOT circuit. `pairs` are the CNOTs
/// after every rotation layer; theta is row-major [layers x n].
inline double circuit_expectation(std::size_t n, const std::vector<double>& gamma,
                                  const std::vector<double>& theta, std::size_t layers,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  Matrix u = Matrix::identity(std::size_t{1} << n);
  for (std::size_t k = 0; k < n; ++k) u = multiply(ry(gamma[k], k, n), u);
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t k = 0; k < n; ++k) u = multiply(ry(theta[l * n + k], k, n), u);
    for (const auto& [c, t] : pairs) u = multiply(cnot(c, t, n), u);
  }
  std::vector<C> psi(std::size_t{1} << n);
  psi[0] = 1.0;
  return expectation(z_all(n), apply_matrix(u, psi));
}

}  // namespace oracle_dense
