#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mfsr/errors.hpp"
#include "mfsr/image.hpp"
#include "mfsr/linear_operator.hpp"

namespace mfsr {

// Backward horizontal difference x(r, c) - x(r, c - 1); zero on the first column.
inline LinearOperator diff_h(Shape shape) {
  if (shape.height < 2 || shape.width < 2) throw DimensionError("diff_h: shape must be at least 2x2");
  const std::size_t H = shape.height, W = shape.width;
  auto forward = [H, W](std::span<const double> x, std::span<double> y) {
    for (std::size_t r = 0; r < H; ++r) y[r] = 0.0;
    for (std::size_t c = 1; c < W; ++c)
      for (std::size_t r = 0; r < H; ++r) y[c * H + r] = x[c * H + r] - x[(c - 1) * H + r];
  };
  auto adjoint = [H, W](std::span<const double> y, std::span<double> x) {
    for (std::size_t c = 0; c < W; ++c)
      for (std::size_t r = 0; r < H; ++r) {
        double v = c > 0 ? y[c * H + r] : 0.0;
        if (c + 1 < W) v -= y[(c + 1) * H + r];
        x[c * H + r] = v;
      }
  };
  return LinearOperator(shape, shape, op::DiffH{}, forward, adjoint);
}

// Backward vertical difference x(r, c) - x(r - 1, c); zero on the first row.
inline LinearOperator diff_v(Shape shape) {
  if (shape.height < 2 || shape.width < 2) throw DimensionError("diff_v: shape must be at least 2x2");
  const std::size_t H = shape.height, W = shape.width;
  auto forward = [H, W](std::span<const double> x, std::span<double> y) {
    for (std::size_t c = 0; c < W; ++c) {
      y[c * H] = 0.0;
      for (std::size_t r = 1; r < H; ++r) y[c * H + r] = x[c * H + r] - x[c * H + r - 1];
    }
  };
  auto adjoint = [H, W](std::span<const double> y, std::span<double> x) {
    for (std::size_t c = 0; c < W; ++c)
      for (std::size_t r = 0; r < H; ++r) {
        double v = r > 0 ? y[c * H + r] : 0.0;
        if (r + 1 < H) v -= y[c * H + r + 1];
        x[c * H + r] = v;
      }
  };
  return LinearOperator(shape, shape, op::DiffV{}, forward, adjoint);
}

enum class TvKind { Classic, Smoothed, LogWeighted };

// Classic:     sum sqrt(dh^2 + dv^2)
// Smoothed:    sum sqrt(dh^2 + dv^2 + eps^2) - eps   (eps = 1 is the minimal-surface form)
// LogWeighted: sum s * p(s), p(s) = (2 + log(1 + s)) / (1 + log(1 + s))
//
// Classic is majorized through its eps_floor-smoothed version; LogWeighted
// can only be evaluated.
struct TvVariant {
  TvKind kind = TvKind::Smoothed;
  double eps = 1.0;
  double eps_floor = 1e-8;

  static TvVariant classic(double floor = 1e-8) { return {TvKind::Classic, 0.0, floor}; }
  static TvVariant smoothed(double eps = 1.0) { return {TvKind::Smoothed, eps, 1e-8}; }
  static TvVariant log_weighted() { return {TvKind::LogWeighted, 0.0, 1e-8}; }

  // Smoothing constant of the functional the solver actually majorizes.
  double majorized_eps() const {
    switch (kind) {
      case TvKind::Classic: return eps_floor;
      case TvKind::Smoothed: return eps;
      case TvKind::LogWeighted: break;
    }
    throw UnsupportedVariantError("log-weighted TV has no quadratic majorizer");
  }

  void validate() const {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw DomainError("tv eps must be >= 0");
    if (kind == TvKind::Classic && !(eps_floor > 0.0)) throw DomainError("tv eps_floor must be > 0");
  }
};

inline std::string to_string(TvKind k) {
  switch (k) {
    case TvKind::Classic: return "classic";
    case TvKind::Smoothed: return "smoothed";
    case TvKind::LogWeighted: return "log_weighted";
  }
  return "?";
}

struct Gradients {
  std::vector<double> dh;
  std::vector<double> dv;
};

inline Gradients image_gradients(const LexVector& x) {
  Gradients g{std::vector<double>(x.size()), std::vector<double>(x.size())};
  diff_h(x.shape).apply_into(x.values, g.dh);
  diff_v(x.shape).apply_into(x.values, g.dv);
  return g;
}

// sum sqrt(dh^2 + dv^2 + eps^2) - eps.
inline double smoothed_tv(const LexVector& x, double eps) {
  const auto g = image_gradients(x);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    total += std::sqrt(g.dh[i] * g.dh[i] + g.dv[i] * g.dv[i] + eps * eps) - eps;
  return total;
}

inline double tv_value(const LexVector& x, const TvVariant& v) {
  if (x.size() == 0) throw DimensionError("tv_value: empty image");
  const auto g = image_gradients(x);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s2 = g.dh[i] * g.dh[i] + g.dv[i] * g.dv[i];
    switch (v.kind) {
      case TvKind::Classic:
        total += std::sqrt(s2);
        break;
      case TvKind::Smoothed:
        total += std::sqrt(s2 + v.eps * v.eps) - v.eps;
        break;
      case TvKind::LogWeighted: {
        const double s = std::sqrt(s2);
        const double l = std::log1p(s);
        total += s * (2.0 + l) / (1.0 + l);
        break;
      }
    }
  }
  return total;
}

inline double tv_value(const ImageGrid& x, const TvVariant& v) { return tv_value(to_lex(x), v); }

// One weight per pixel, shared by the horizontal and vertical terms.
struct WeightField {
  Shape shape;
  std::vector<double> w;
};

// w_i = (lambda / 2) / sqrt(dh_i^2 + dv_i^2 + eps^2) at the current iterate.
inline WeightField mm_weights(const LexVector& x_t, double lambda, const TvVariant& v) {
  if (!(lambda > 0.0)) throw DomainError("mm_weights: lambda must be positive");
  const double eps = v.majorized_eps();
  const auto g = image_gradients(x_t);
  WeightField wf{x_t.shape, std::vector<double>(x_t.size())};
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    const double denom = std::sqrt(g.dh[i] * g.dh[i] + g.dv[i] * g.dv[i] + eps * eps);
    wf.w[i] = 0.5 * lambda / denom;
    if (!std::isfinite(wf.w[i]) || !(wf.w[i] > 0.0))
      throw NumericalError("mm_weights: non-finite weight at pixel " + std::to_string(i));
  }
  return wf;
}

inline WeightField mm_weights(const ImageGrid& x_t, double lambda, const TvVariant& v) {
  return mm_weights(to_lex(x_t), lambda, v);
}

}  // namespace mfsr
