#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mfsr/cg.hpp"
#include "mfsr/errors.hpp"
#include "mfsr/image.hpp"
#include "mfsr/linear_operator.hpp"
#include "mfsr/observation.hpp"
#include "mfsr/tv.hpp"

namespace mfsr {

struct SolverConfig {
  double lambda = 1.0;
  double cg_eps = 0.1;
  int cg_max_iters = 50;
  int mm_max_iters = 10;
  double mm_rel_tol = 1e-4;  // 0 disables the relative-change stop
  TvVariant tv = TvVariant::smoothed(1.0);

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be positive");
    if (!(cg_eps > 0.0)) throw DomainError("cg_eps must be positive");
    if (cg_max_iters < 1) throw DomainError("cg_max_iters must be positive");
    if (mm_max_iters < 1) throw DomainError("mm_max_iters must be positive");
    if (!(mm_rel_tol >= 0.0)) throw DomainError("mm_rel_tol must be non-negative");
    tv.validate();
  }
};

namespace detail {

inline void check_problem(const ObservationSet& obs, const std::vector<LinearOperator>& ops) {
  if (obs.frames.empty()) throw EmptyObservationError("no observations");
  if (ops.size() != obs.frames.size())
    throw DimensionError("need one observation operator per frame");
  for (std::size_t k = 0; k < ops.size(); ++k) {
    if (ops[k].in_shape() != obs.hr_shape)
      throw DimensionError("operator " + std::to_string(k) + " does not act on the HR grid");
    if (ops[k].out_len() != obs.frames[k].image.size())
      throw DimensionError("operator " + std::to_string(k) + " output does not match frame size");
  }
}

inline void check_x(const LexVector& x, const ObservationSet& obs) {
  if (x.shape != obs.hr_shape || x.size() != obs.hr_shape.size())
    throw DimensionError("estimate shape " + to_string(x.shape) + " differs from HR shape " +
                         to_string(obs.hr_shape));
}

}  // namespace detail

// sum_k ||H_k x - y_k||^2
inline double data_misfit(const LexVector& x, const ObservationSet& obs, const std::vector<LinearOperator>& ops) {
  detail::check_problem(obs, ops);
  detail::check_x(x, obs);
  double total = 0.0;
  std::vector<double> hx;
  for (std::size_t k = 0; k < ops.size(); ++k) {
    hx.assign(ops[k].out_len(), 0.0);
    ops[k].apply_into(x.values, hx);
    const auto y = obs.frames[k].image.data();
    for (std::size_t i = 0; i < hx.size(); ++i) total += (hx[i] - y[i]) * (hx[i] - y[i]);
  }
  return total;
}

// L(x) = sum_k ||H_k x - y_k||^2 + lambda * TV(x) for the configured variant.
inline double objective(const LexVector& x, const ObservationSet& obs, const std::vector<LinearOperator>& ops,
                        const SolverConfig& cfg) {
  return data_misfit(x, obs, ops) + cfg.lambda * tv_value(x, cfg.tv);
}

// L with the TV term replaced by the eps-smoothed functional the MM
// iteration majorizes (identical to objective() for the Smoothed variant).
inline double smoothed_objective(const LexVector& x, const ObservationSet& obs,
                                 const std::vector<LinearOperator>& ops, const SolverConfig& cfg) {
  return data_misfit(x, obs, ops) + cfg.lambda * smoothed_tv(x, cfg.tv.majorized_eps());
}

// Gradient of smoothed_objective:
// 2 sum_k H_k^T (H_k x - y_k) + lambda * grad TV_eps(x).
inline LexVector smoothed_objective_gradient(const LexVector& x, const ObservationSet& obs,
                                             const std::vector<LinearOperator>& ops, const SolverConfig& cfg) {
  detail::check_problem(obs, ops);
  detail::check_x(x, obs);
  LexVector g(x.shape);
  std::vector<double> hx, back(x.size());
  for (std::size_t k = 0; k < ops.size(); ++k) {
    hx.assign(ops[k].out_len(), 0.0);
    ops[k].apply_into(x.values, hx);
    const auto y = obs.frames[k].image.data();
    for (std::size_t i = 0; i < hx.size(); ++i) hx[i] = 2.0 * (hx[i] - y[i]);
    ops[k].apply_adjoint_into(hx, back);
    for (std::size_t i = 0; i < x.size(); ++i) g[i] += back[i];
  }
  const double eps = cfg.tv.majorized_eps();
  auto grads = image_gradients(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = std::sqrt(grads.dh[i] * grads.dh[i] + grads.dv[i] * grads.dv[i] + eps * eps);
    grads.dh[i] /= s;
    grads.dv[i] /= s;
  }
  diff_h(x.shape).apply_adjoint_into(grads.dh, back);
  for (std::size_t i = 0; i < x.size(); ++i) g[i] += cfg.lambda * back[i];
  diff_v(x.shape).apply_adjoint_into(grads.dv, back);
  for (std::size_t i = 0; i < x.size(); ++i) g[i] += cfg.lambda * back[i];
  return g;
}

// Quadratic surrogate of smoothed_objective around x_t:
// Q(x|x_t) = sum_k ||H_k x - y_k||^2 + lambda * TV_eps(x_t)
//            + sum_i w_i [(dh_i x)^2 - (dh_i x_t)^2 + (dv_i x)^2 - (dv_i x_t)^2].
inline double majorizer_value(const LexVector& x, const LexVector& x_t, const ObservationSet& obs,
                              const std::vector<LinearOperator>& ops, const SolverConfig& cfg) {
  detail::check_x(x_t, obs);
  const WeightField wf = mm_weights(x_t, cfg.lambda, cfg.tv);
  const auto g = image_gradients(x);
  const auto gt = image_gradients(x_t);
  double quad = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    quad += wf.w[i] * ((g.dh[i] * g.dh[i] - gt.dh[i] * gt.dh[i]) + (g.dv[i] * g.dv[i] - gt.dv[i] * gt.dv[i]));
  return data_misfit(x, obs, ops) + cfg.lambda * smoothed_tv(x_t, cfg.tv.majorized_eps()) + quad;
}

// Y' = sum_k H_k^T y_k
inline LexVector back_projection(const ObservationSet& obs, const std::vector<LinearOperator>& ops) {
  detail::check_problem(obs, ops);
  LexVector out(obs.hr_shape);
  std::vector<double> back(out.size());
  for (std::size_t k = 0; k < ops.size(); ++k) {
    ops[k].apply_adjoint_into(obs.frames[k].image.data(), back);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += back[i];
  }
  return out;
}

// A = sum_k H_k^T H_k + Dh^T W Dh + Dv^T W Dv
inline LinearOperator normal_operator(const std::vector<LinearOperator>& ops, const WeightField& wf) {
  const Shape shape = wf.shape;
  struct Parts {
    std::vector<LinearOperator> ops;
    LinearOperator dh, dv;
    std::vector<double> w;
  };
  auto parts = std::make_shared<const Parts>(Parts{ops, diff_h(shape), diff_v(shape), wf.w});
  auto apply = [parts](std::span<const double> x, std::span<double> y) {
    const std::size_t n = x.size();
    std::fill(y.begin(), y.end(), 0.0);
    std::vector<double> low, back(n), d(n);
    for (const auto& H : parts->ops) {
      low.assign(H.out_len(), 0.0);
      H.apply_into(x, low);
      H.apply_adjoint_into(low, back);
      for (std::size_t i = 0; i < n; ++i) y[i] += back[i];
    }
    for (const LinearOperator* D : {&parts->dh, &parts->dv}) {
      D->apply_into(x, d);
      for (std::size_t i = 0; i < n; ++i) d[i] *= parts->w[i];
      D->apply_adjoint_into(d, back);
      for (std::size_t i = 0; i < n; ++i) y[i] += back[i];
    }
  };
  return LinearOperator(shape, shape, op::Custom{"MM normal operator"}, apply, apply);
}

struct MmIteration {
  int iteration = 0;       // 1-based outer iteration
  double objective = 0.0;  // value after the iteration
  int cg_iterations = 0;
};

struct MmResult {
  ImageGrid x_hat;
  // trace[0] is the objective at the initial estimate, trace[t] after outer iteration t.
  std::vector<double> trace;
  std::vector<int> cg_iterations;
};

using MmObserver = std::function<void(const MmIteration&)>;

// Majorization-minimization for TV-regularized multi-frame reconstruction.
// Starts from Y' = sum_k H_k^T y_k; every outer iteration recomputes the
// weights at X^(t) and runs CG on A^(t) X = Y' starting from X^(t). The trace
// holds smoothed_objective, the functional whose descent MM guarantees.
inline MmResult mm_deconvolve(const ObservationSet& obs, const std::vector<LinearOperator>& ops,
                              const SolverConfig& cfg, const MmObserver& observer = {}) {
  detail::check_problem(obs, ops);
  cfg.validate();
  if (cfg.tv.kind == TvKind::LogWeighted)
    throw UnsupportedVariantError("mm_deconvolve: log-weighted TV can be evaluated but not minimized");

  const LexVector rhs = back_projection(obs, ops);
  LexVector x = rhs;
  MmResult res;
  res.trace.push_back(smoothed_objective(x, obs, ops, cfg));
  for (int t = 1; t <= cfg.mm_max_iters; ++t) {
    const WeightField wf = mm_weights(x, cfg.lambda, cfg.tv);
    const LinearOperator A = normal_operator(ops, wf);
    CgResult cg = cg_solve(A, rhs, x, cfg.cg_eps, cfg.cg_max_iters);
    x = std::move(cg.x);
    const double L = smoothed_objective(x, obs, ops, cfg);
    if (!std::isfinite(L)) throw NumericalError("mm_deconvolve: objective became non-finite");
    const double previous = res.trace.back();
    res.trace.push_back(L);
    res.cg_iterations.push_back(cg.iterations);
    if (observer) observer({t, L, cg.iterations});
    if (cfg.mm_rel_tol > 0.0 && std::abs(L - previous) <= cfg.mm_rel_tol * std::abs(previous)) break;
  }
  res.x_hat = from_lex(x);
  return res;
}

}  // namespace mfsr
