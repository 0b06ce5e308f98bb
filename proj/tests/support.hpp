#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "mfsr/mfsr.hpp"

namespace testing_support {

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline mfsr::LexVector random_lex(mfsr::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  mfsr::LexVector v(shape);
  v.values = random_values(shape.size(), rng, lo, hi);
  return v;
}

inline mfsr::ImageGrid random_image(mfsr::Shape shape, std::mt19937_64& rng, double lo = 0.0, double hi = 255.0) {
  return mfsr::from_lex(random_lex(shape, rng, lo, hi));
}

inline std::vector<double> matvec(const mfsr::DenseMatrix& M, const std::vector<double>& x) {
  std::vector<double> y(M.rows, 0.0);
  for (std::size_t i = 0; i < M.rows; ++i)
    for (std::size_t j = 0; j < M.cols; ++j) y[i] += M(i, j) * x[j];
  return y;
}

// Dense Cholesky solve, used as a direct-solver oracle.
inline std::vector<double> cholesky_solve(const mfsr::DenseMatrix& A, std::vector<double> b) {
  const std::size_t n = A.rows;
  std::vector<double> L(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = A(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= L[j * n + k] * L[j * n + k];
    if (d <= 0.0) throw std::runtime_error("matrix is not positive definite");
    L[j * n + j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = A(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L[i * n + k] * L[j * n + k];
      L[i * n + j] = s / L[j * n + j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= L[i * n + k] * b[k];
    b[i] /= L[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) b[i] -= L[k * n + i] * b[k];
    b[i] /= L[i * n + i];
  }
  return b;
}

// B^T B + shift * I with B random, so the spectrum stays moderate.
inline mfsr::DenseMatrix random_spd(std::size_t n, std::mt19937_64& rng, double shift = 0.5) {
  const auto B = random_values(n * n, rng);
  mfsr::DenseMatrix A(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = i == j ? shift : 0.0;
      for (std::size_t k = 0; k < n; ++k) s += B[k * n + i] * B[k * n + j];
      A.data[i * n + j] = s;
    }
  return A;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// |<Ax, y> - <x, A^T y>| relative to the magnitude of the terms.
inline double adjoint_mismatch(const mfsr::LinearOperator& A, std::mt19937_64& rng) {
  const auto x = random_lex(A.in_shape(), rng);
  const auto y = random_lex(A.out_shape(), rng);
  const double lhs = mfsr::dot(A.apply(x).values, y.values);
  const double rhs = mfsr::dot(x.values, A.apply_adjoint(y).values);
  return std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs) + std::abs(rhs));
}

// Observation set with random HR truth and the given frame specs.
inline mfsr::ObservationSet make_problem(mfsr::Shape hr, const std::vector<mfsr::FrameSpec>& specs,
                                         std::mt19937_64& rng) {
  return mfsr::simulate_observations(random_image(hr, rng), specs);
}

}  // namespace testing_support
