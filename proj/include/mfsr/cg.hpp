#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mfsr/errors.hpp"
#include "mfsr/image.hpp"
#include "mfsr/linear_operator.hpp"

namespace mfsr {

struct CgResult {
  LexVector x;
  int iterations = 0;
  double residual_norm = 0.0;  // ||y - A x|| from the CG recurrence
  bool converged = false;
};

// Called after every iteration with the new iterate and the search direction
// that produced it.
using CgObserver = std::function<void(int iteration, const LexVector& x, std::span<const double> direction)>;

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string("cg_solve: non-finite ") + what);
}

inline void probe_symmetry(const LinearOperator& A) {
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> g;
  std::vector<double> u(A.in_len()), v(A.in_len()), Au(A.in_len()), Av(A.in_len());
  for (auto& e : u) e = g(rng);
  for (auto& e : v) e = g(rng);
  A.apply_into(u, Au);
  A.apply_into(v, Av);
  const double lhs = dot(Au, v), rhs = dot(u, Av);
  if (std::abs(lhs - rhs) > 1e-8 * norm2(Au) * norm2(v) + 1e-300)
    throw NumericalError("cg_solve: operator is not symmetric");
}

}  // namespace detail

// Conjugate gradients for A x = y with A symmetric positive semidefinite.
// Stops when ||y - A x|| <= eps * ||y|| or after max_iters iterations.
inline CgResult cg_solve(const LinearOperator& A, const LexVector& y, const LexVector& x0, double eps,
                         int max_iters, const CgObserver& observer = {}) {
  if (A.in_len() != A.out_len()) throw DimensionError("cg_solve: operator must be square");
  if (y.size() != A.out_len() || x0.size() != A.in_len())
    throw DimensionError("cg_solve: right-hand side or start vector has wrong length");
#ifndef NDEBUG
  detail::probe_symmetry(A);
#endif
  const std::size_t n = y.size();
  CgResult res{x0, 0, 0.0, false};
  res.x.shape = A.in_shape();
  std::vector<double> r(n), p(n), Ap(n);

  A.apply_into(res.x.values, Ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - Ap[i];
  double rr = dot(r, r);
  detail::require_finite(rr, "residual");
  const double target = eps * norm2(y.values);
  res.residual_norm = std::sqrt(rr);
  if (res.residual_norm <= target) {
    res.converged = true;
    return res;
  }
  p = r;

  while (res.iterations < max_iters) {
    A.apply_into(p, Ap);
    const double pAp = dot(p, Ap);
    detail::require_finite(pAp, "curvature");
    if (pAp <= 0.0) break;  // direction in the null space of a semidefinite A
    const double step = rr / pAp;
    for (std::size_t i = 0; i < n; ++i) {
      res.x.values[i] += step * p[i];
      r[i] -= step * Ap[i];
    }
    const double rr_next = dot(r, r);
    detail::require_finite(rr_next, "residual");
    ++res.iterations;
    res.residual_norm = std::sqrt(rr_next);
    if (observer) observer(res.iterations, res.x, p);
    if (res.residual_norm <= target) {
      res.converged = true;
      break;
    }
    const double beta = rr_next / rr;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    rr = rr_next;
  }
  return res;
}

}  // namespace mfsr
