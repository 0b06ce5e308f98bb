#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "mfsr/errors.hpp"
#include "mfsr/image.hpp"

namespace mfsr {

// Per-pixel velocity in pixels per frame interval; vx along columns, vy along rows.
struct FlowField {
  ImageGrid vx;
  ImageGrid vy;

  FlowField() = default;
  explicit FlowField(Shape shape) : vx(shape), vy(shape) {}
  FlowField(ImageGrid x, ImageGrid y) : vx(std::move(x)), vy(std::move(y)) {
    if (vx.shape() != vy.shape()) throw DimensionError("FlowField: component shapes differ");
  }

  const Shape& shape() const { return vx.shape(); }
};

enum class StencilBoundary {
  Zero,         // missing neighbours read as zero
  Renormalize,  // missing neighbours dropped, remaining weights rescaled to sum 1
};

struct FlowConfig {
  double alpha = 1.0;
  int iterations = 100;
  // 1 runs plain single-scale Horn-Schunck.
  int pyramid_levels = 1;
  // The remaining fields only apply when pyramid_levels > 1.
  // Re-linearizations per level.
  int warps_per_level = 3;
  // Gaussian pre-smoothing of each level's frames, in pixels (0 disables).
  double presmooth_sigma = 1.0;
  // Median filter radius applied to the flow after each warp (0 disables).
  int median_radius = 2;
  StencilBoundary pyramid_boundary = StencilBoundary::Renormalize;

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("flow alpha must be positive");
    if (iterations < 1) throw DomainError("flow iterations must be positive");
    if (pyramid_levels < 1) throw DomainError("pyramid_levels must be >= 1");
    if (warps_per_level < 1) throw DomainError("warps_per_level must be >= 1");
    if (!(presmooth_sigma >= 0.0)) throw DomainError("presmooth_sigma must be >= 0");
    if (median_radius < 0) throw DomainError("median_radius must be >= 0");
  }
};

struct Derivatives {
  ImageGrid ix;
  ImageGrid iy;
  ImageGrid it;
};

namespace detail {

inline double at_or_zero(const ImageGrid& f, std::size_t r, std::size_t c) {
  return (r < f.height() && c < f.width()) ? f(r, c) : 0.0;
}

inline void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* who) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(who) + ": frame shapes differ (" + to_string(a.shape()) +
                         " vs " + to_string(b.shape()) + ")");
}

}  // namespace detail

// Brightness derivatives at the center of each 2x2x2 cube: every derivative
// is the mean of four first differences. Cells beyond the last row/column
// read as zero. It follows f2 - f1.
inline Derivatives derivatives(const ImageGrid& f1, const ImageGrid& f2) {
  detail::require_same_shape(f1, f2, "derivatives");
  if (f1.height() < 2 || f1.width() < 2) throw DimensionError("derivatives: frames must be at least 2x2");
  using detail::at_or_zero;
  Derivatives d{ImageGrid(f1.shape()), ImageGrid(f1.shape()), ImageGrid(f1.shape())};
  for (std::size_t j = 0; j < f1.width(); ++j)
    for (std::size_t i = 0; i < f1.height(); ++i) {
      const double a00 = f1(i, j), a01 = at_or_zero(f1, i, j + 1);
      const double a10 = at_or_zero(f1, i + 1, j), a11 = at_or_zero(f1, i + 1, j + 1);
      const double b00 = f2(i, j), b01 = at_or_zero(f2, i, j + 1);
      const double b10 = at_or_zero(f2, i + 1, j), b11 = at_or_zero(f2, i + 1, j + 1);
      d.ix(i, j) = 0.25 * ((a01 - a00) + (a11 - a10) + (b01 - b00) + (b11 - b10));
      d.iy(i, j) = 0.25 * ((a10 - a00) + (a11 - a01) + (b10 - b00) + (b11 - b01));
      d.it(i, j) = 0.25 * ((b00 - a00) + (b10 - a10) + (b01 - a01) + (b11 - a11));
    }
  return d;
}

// 3x3 neighborhood mean: edges 1/6, corners 1/12, center 0.
inline ImageGrid local_average(const ImageGrid& v, StencilBoundary boundary = StencilBoundary::Zero) {
  const auto H = static_cast<std::ptrdiff_t>(v.height());
  const auto W = static_cast<std::ptrdiff_t>(v.width());
  ImageGrid out(v.shape());
  for (std::ptrdiff_t c = 0; c < W; ++c)
    for (std::ptrdiff_t r = 0; r < H; ++r) {
      double acc = 0.0, weight = 0.0;
      for (std::ptrdiff_t dc = -1; dc <= 1; ++dc)
        for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
          if (dr == 0 && dc == 0) continue;
          const std::ptrdiff_t rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= H || cc >= W) continue;
          const double w = (dr == 0 || dc == 0) ? 1.0 / 6.0 : 1.0 / 12.0;
          acc += w * v(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
          weight += w;
        }
      if (boundary == StencilBoundary::Renormalize && weight > 0.0) acc /= weight;
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
    }
  return out;
}

inline FlowField local_average(const FlowField& flow) {
  return FlowField(local_average(flow.vx), local_average(flow.vy));
}

// Jacobi sweeps of the coupled Horn-Schunck update starting from `flow`.
inline void horn_schunck_sweeps(const Derivatives& d, double alpha, int iterations, FlowField& flow,
                                StencilBoundary boundary = StencilBoundary::Zero) {
  const double a2 = alpha * alpha;
  for (int k = 0; k < iterations; ++k) {
    const ImageGrid ax = local_average(flow.vx, boundary);
    const ImageGrid ay = local_average(flow.vy, boundary);
    for (std::size_t i = 0; i < ax.size(); ++i) {
      const double ix = d.ix.data()[i], iy = d.iy.data()[i], it = d.it.data()[i];
      const double mx = ax.data()[i], my = ay.data()[i];
      const double common = (ix * mx + iy * my + it) / (a2 + ix * ix + iy * iy);
      flow.vx.data()[i] = mx - ix * common;
      flow.vy.data()[i] = my - iy * common;
    }
  }
}

namespace detail {

// 2x2 box average; an odd trailing row/column is dropped.
inline ImageGrid downsample2(const ImageGrid& f) {
  ImageGrid out(f.height() / 2, f.width() / 2);
  for (std::size_t c = 0; c < out.width(); ++c)
    for (std::size_t r = 0; r < out.height(); ++r)
      out(r, c) = 0.25 * (f(2 * r, 2 * c) + f(2 * r + 1, 2 * c) + f(2 * r, 2 * c + 1) +
                          f(2 * r + 1, 2 * c + 1));
  return out;
}

// Nearest-neighbour upsampling to `shape`, scaling vectors by 2.
inline FlowField upsample_flow(const FlowField& coarse, Shape shape) {
  FlowField fine(shape);
  for (std::size_t c = 0; c < shape.width; ++c)
    for (std::size_t r = 0; r < shape.height; ++r) {
      const std::size_t cr = std::min(r / 2, coarse.shape().height - 1);
      const std::size_t cc = std::min(c / 2, coarse.shape().width - 1);
      fine.vx(r, c) = 2.0 * coarse.vx(cr, cc);
      fine.vy(r, c) = 2.0 * coarse.vy(cr, cc);
    }
  return fine;
}

// Samples f at (r + vy, c + vx) bilinearly, replicating the border.
inline ImageGrid warp_by_flow(const ImageGrid& f, const FlowField& flow) {
  const double maxr = static_cast<double>(f.height() - 1);
  const double maxc = static_cast<double>(f.width() - 1);
  ImageGrid out(f.shape());
  for (std::size_t c = 0; c < f.width(); ++c)
    for (std::size_t r = 0; r < f.height(); ++r) {
      const double vx = flow.vx(r, c), vy = flow.vy(r, c);
      if (vx == 0.0 && vy == 0.0) {
        out(r, c) = f(r, c);
        continue;
      }
      const double y = std::clamp(static_cast<double>(r) + vy, 0.0, maxr);
      const double x = std::clamp(static_cast<double>(c) + vx, 0.0, maxc);
      const auto r0 = static_cast<std::size_t>(std::floor(y));
      const auto c0 = static_cast<std::size_t>(std::floor(x));
      const std::size_t r1 = std::min(r0 + 1, f.height() - 1);
      const std::size_t c1 = std::min(c0 + 1, f.width() - 1);
      const double fy = y - static_cast<double>(r0), fx = x - static_cast<double>(c0);
      out(r, c) = (1 - fy) * ((1 - fx) * f(r0, c0) + fx * f(r0, c1)) +
                  fy * ((1 - fx) * f(r1, c0) + fx * f(r1, c1));
    }
  return out;
}

// Separable Gaussian blur with replicated borders.
inline ImageGrid gaussian_smooth(const ImageGrid& f, double sigma) {
  if (sigma <= 0.0) return f;
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  const auto H = static_cast<std::ptrdiff_t>(f.height());
  const auto W = static_cast<std::ptrdiff_t>(f.width());
  auto clampi = [](std::ptrdiff_t v, std::ptrdiff_t n) { return std::clamp<std::ptrdiff_t>(v, 0, n - 1); };
  ImageGrid tmp(f.shape()), out(f.shape());
  for (std::ptrdiff_t c = 0; c < W; ++c)
    for (std::ptrdiff_t r = 0; r < H; ++r) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -radius; i <= radius; ++i)
        acc += k[static_cast<std::size_t>(i + radius)] *
               f(static_cast<std::size_t>(r), static_cast<std::size_t>(clampi(c + i, W)));
      tmp(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
    }
  for (std::ptrdiff_t c = 0; c < W; ++c)
    for (std::ptrdiff_t r = 0; r < H; ++r) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -radius; i <= radius; ++i)
        acc += k[static_cast<std::size_t>(i + radius)] *
               tmp(static_cast<std::size_t>(clampi(r + i, H)), static_cast<std::size_t>(c));
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
    }
  return out;
}

// Median over a (2*radius+1)^2 window clipped to the grid.
inline ImageGrid median_filter(const ImageGrid& f, std::ptrdiff_t radius) {
  const auto H = static_cast<std::ptrdiff_t>(f.height());
  const auto W = static_cast<std::ptrdiff_t>(f.width());
  ImageGrid out(f.shape());
  std::vector<double> win;
  for (std::ptrdiff_t c = 0; c < W; ++c)
    for (std::ptrdiff_t r = 0; r < H; ++r) {
      win.clear();
      for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, c - radius); j <= std::min(W - 1, c + radius); ++j)
        for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, r - radius); i <= std::min(H - 1, r + radius); ++i)
          win.push_back(f(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
      auto mid = win.begin() + static_cast<std::ptrdiff_t>(win.size() / 2);
      std::nth_element(win.begin(), mid, win.end());
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = *mid;
    }
  return out;
}

}  // namespace detail

// Horn-Schunck flow from f1 to f2, starting from zero velocity.
//
// With cfg.pyramid_levels > 1 the estimate runs coarse to fine: frames are
// halved by 2x2 box averaging, each level warps f2 by the current flow and
// refines the flow, and the flow is doubled on the way up. Levels that
// would drop below 8 pixels on a side are skipped.
inline FlowField horn_schunck(const ImageGrid& f1, const ImageGrid& f2, const FlowConfig& cfg) {
  detail::require_same_shape(f1, f2, "horn_schunck");
  cfg.validate();

  if (cfg.pyramid_levels <= 1) {
    FlowField flow(f1.shape());
    horn_schunck_sweeps(derivatives(f1, f2), cfg.alpha, cfg.iterations, flow);
    return flow;
  }

  std::vector<std::pair<ImageGrid, ImageGrid>> pyramid{{f1, f2}};
  while (static_cast<int>(pyramid.size()) < cfg.pyramid_levels) {
    const auto& top = pyramid.back().first;
    if (top.height() / 2 < 8 || top.width() / 2 < 8) break;
    pyramid.emplace_back(detail::downsample2(pyramid.back().first),
                         detail::downsample2(pyramid.back().second));
  }

  FlowField flow(pyramid.back().first.shape());
  for (auto level = pyramid.size(); level-- > 0;) {
    const ImageGrid a = detail::gaussian_smooth(pyramid[level].first, cfg.presmooth_sigma);
    const ImageGrid b = detail::gaussian_smooth(pyramid[level].second, cfg.presmooth_sigma);
    if (flow.shape() != a.shape()) flow = detail::upsample_flow(flow, a.shape());
    for (int w = 0; w < cfg.warps_per_level; ++w) {
      // Linearize around the current flow: Ix (v - v0) + Iy (u - u0) + It_w = 0,
      // and smooth the total flow rather than the increment.
      Derivatives d = derivatives(a, detail::warp_by_flow(b, flow));
      for (std::size_t i = 0; i < d.it.size(); ++i)
        d.it.data()[i] -= d.ix.data()[i] * flow.vx.data()[i] + d.iy.data()[i] * flow.vy.data()[i];
      horn_schunck_sweeps(d, cfg.alpha, cfg.iterations, flow, cfg.pyramid_boundary);
      if (cfg.median_radius > 0)
        flow = FlowField(detail::median_filter(flow.vx, cfg.median_radius),
                         detail::median_filter(flow.vy, cfg.median_radius));
    }
  }
  return flow;
}

// Data term plus alpha-weighted smoothness, with forward differences for the
// flow gradient (none across the last row/column).
inline double hs_energy(const ImageGrid& f1, const ImageGrid& f2, const FlowField& flow, double alpha) {
  detail::require_same_shape(f1, f2, "hs_energy");
  if (flow.shape() != f1.shape()) throw DimensionError("hs_energy: flow shape differs from frames");
  const Derivatives d = derivatives(f1, f2);
  double data = 0.0, smooth = 0.0;
  const std::size_t H = f1.height(), W = f1.width();
  for (std::size_t c = 0; c < W; ++c)
    for (std::size_t r = 0; r < H; ++r) {
      const double e = d.ix(r, c) * flow.vx(r, c) + d.iy(r, c) * flow.vy(r, c) + d.it(r, c);
      data += e * e;
      for (const ImageGrid* v : {&flow.vx, &flow.vy}) {
        if (c + 1 < W) smooth += std::pow((*v)(r, c + 1) - (*v)(r, c), 2);
        if (r + 1 < H) smooth += std::pow((*v)(r + 1, c) - (*v)(r, c), 2);
      }
    }
  return data + alpha * smooth;
}

struct Shift {
  double dx = 0.0;
  double dy = 0.0;
};

// Mean flow over the centered window spanning `fraction` of each axis.
inline Shift global_shift(const FlowField& flow, double fraction = 0.5) {
  if (flow.vx.empty()) throw DimensionError("global_shift: empty flow");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw DomainError("global_shift: fraction must be in (0, 1]");
  auto window = [fraction](std::size_t n) {
    const auto len = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n))), 1, n);
    return std::pair{(n - len) / 2, len};
  };
  const auto [r0, rh] = window(flow.shape().height);
  const auto [c0, cw] = window(flow.shape().width);
  double sx = 0.0, sy = 0.0;
  for (std::size_t c = c0; c < c0 + cw; ++c)
    for (std::size_t r = r0; r < r0 + rh; ++r) {
      sx += flow.vx(r, c);
      sy += flow.vy(r, c);
    }
  const double n = static_cast<double>(rh * cw);
  return {sx / n, sy / n};
}

}  // namespace mfsr
