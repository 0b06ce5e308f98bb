#pragma once

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <limits>
#include <vector>

#include "mfsr/errors.hpp"
#include "mfsr/image.hpp"
#include "mfsr/observation.hpp"

namespace mfsr {

struct InterpolationResult {
  ImageGrid image;
  double last_change = 0.0;  // largest pixel change over the final sweep
};

// Places LR pixels at stride-`factor` positions (top-left phase) and fills
// the gaps by repeated three-point averaging, rows first then columns. Each
// pass is a Jacobi update; a neighbour outside the grid is left out of the
// average. Projected pixels are never modified.
inline InterpolationResult zero_fill_interpolate_report(const ImageGrid& lr, std::size_t factor, int sweeps) {
  if (factor < 1) throw DomainError("zero_fill_interpolate: factor must be >= 1");
  if (sweeps < 1) throw DomainError("zero_fill_interpolate: sweeps must be >= 1");
  const std::size_t H = lr.height() * factor, W = lr.width() * factor;
  ImageGrid hr(H, W);
  std::vector<char> fixed(H * W, 0);
  for (std::size_t c = 0; c < lr.width(); ++c)
    for (std::size_t r = 0; r < lr.height(); ++r) {
      hr(r * factor, c * factor) = lr(r, c);
      fixed[(c * factor) * H + r * factor] = 1;
    }
  InterpolationResult res{hr, 0.0};
  if (factor == 1) return res;

  ImageGrid prev(H, W);
  for (int s = 0; s < sweeps; ++s) {
    const ImageGrid start = res.image;
    for (int pass = 0; pass < 2; ++pass) {
      prev = res.image;
      for (std::size_t c = 0; c < W; ++c)
        for (std::size_t r = 0; r < H; ++r) {
          if (fixed[c * H + r]) continue;
          double sum = prev(r, c);
          int count = 1;
          if (pass == 0) {
            if (c > 0) sum += prev(r, c - 1), ++count;
            if (c + 1 < W) sum += prev(r, c + 1), ++count;
          } else {
            if (r > 0) sum += prev(r - 1, c), ++count;
            if (r + 1 < H) sum += prev(r + 1, c), ++count;
          }
          res.image(r, c) = sum / count;
        }
    }
    double change = 0.0;
    for (std::size_t i = 0; i < start.size(); ++i)
      change = std::max(change, std::abs(res.image.data()[i] - start.data()[i]));
    res.last_change = change;
  }
  return res;
}

inline ImageGrid zero_fill_interpolate(const ImageGrid& lr, std::size_t factor, int sweeps) {
  return zero_fill_interpolate_report(lr, factor, sweeps).image;
}

struct IntShift {
  int dx = 0;
  int dy = 0;
  bool operator==(const IntShift&) const = default;
};

struct RegistrationResult {
  IntShift shift;
  double mad_at_best = 0.0;
  int search_radius = 0;
};

// Mean absolute difference between frame(r, c) and ref(r - dy, c - dx) over
// the overlap of the two grids.
inline double overlap_mad(const ImageGrid& ref, const ImageGrid& frame, int dx, int dy) {
  const auto H = static_cast<long>(ref.height()), W = static_cast<long>(ref.width());
  double sum = 0.0;
  long count = 0;
  for (long c = std::max(0L, static_cast<long>(dx)); c < std::min(W, W + dx); ++c)
    for (long r = std::max(0L, static_cast<long>(dy)); r < std::min(H, H + dy); ++r) {
      sum += std::abs(frame(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) -
                      ref(static_cast<std::size_t>(r - dy), static_cast<std::size_t>(c - dx)));
      ++count;
    }
  return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::infinity();
}

// Exhaustive integer search for the translation (dx, dy) that maps ref onto
// frame. Ties go to the smaller |dx| + |dy|, then smaller dx, then smaller dy.
inline RegistrationResult mad_register(const ImageGrid& ref, const ImageGrid& frame, int radius) {
  if (ref.shape() != frame.shape()) throw DimensionError("mad_register: shapes differ");
  if (radius < 0) throw DomainError("mad_register: radius must be >= 0");
  if (static_cast<std::size_t>(radius) >= std::min(ref.height(), ref.width()))
    throw DimensionError("mad_register: radius must be smaller than the image");
  RegistrationResult best{{0, 0}, std::numeric_limits<double>::infinity(), radius};
  auto better = [](double mad, IntShift s, const RegistrationResult& cur) {
    if (mad != cur.mad_at_best) return mad < cur.mad_at_best;
    const int l1 = std::abs(s.dx) + std::abs(s.dy);
    const int cur_l1 = std::abs(cur.shift.dx) + std::abs(cur.shift.dy);
    if (l1 != cur_l1) return l1 < cur_l1;
    if (s.dx != cur.shift.dx) return s.dx < cur.shift.dx;
    return s.dy < cur.shift.dy;
  };
  for (int dx = -radius; dx <= radius; ++dx)
    for (int dy = -radius; dy <= radius; ++dy) {
      const double mad = overlap_mad(ref, frame, dx, dy);
      if (better(mad, {dx, dy}, best)) {
        best.shift = {dx, dy};
        best.mad_at_best = mad;
      }
    }
  return best;
}

// Moves every frame back by its shift (integer copy, zero fill) and averages
// the frames that cover each pixel.
inline ImageGrid fuse(const std::vector<ImageGrid>& frames, const std::vector<IntShift>& shifts) {
  if (frames.empty()) throw EmptyObservationError("fuse: no frames");
  if (shifts.size() != frames.size()) throw DimensionError("fuse: one shift per frame required");
  const Shape shape = frames.front().shape();
  // Running mean, so identical contributions reproduce their value exactly.
  ImageGrid mean(shape);
  std::vector<int> count(shape.size(), 0);
  const auto H = static_cast<long>(shape.height), W = static_cast<long>(shape.width);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (frames[k].shape() != shape) throw DimensionError("fuse: frame shapes differ");
    for (long c = 0; c < W; ++c)
      for (long r = 0; r < H; ++r) {
        const long sr = r + shifts[k].dy, sc = c + shifts[k].dx;
        if (sr < 0 || sc < 0 || sr >= H || sc >= W) continue;
        const auto i = static_cast<std::size_t>(c * H + r);
        const double v = frames[k](static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
        mean.data()[i] += (v - mean.data()[i]) / ++count[i];
      }
  }
  return mean;
}

struct FusionConfig {
  int sweeps = 50;
  int search_radius = 4;
};

struct FusionResult {
  ImageGrid fused;
  std::vector<ImageGrid> interpolated;
  std::vector<IntShift> shifts;
};

// Interpolate every frame onto the HR grid, register each against the first,
// then average.
inline FusionResult fusion_baseline(const ObservationSet& obs, const FusionConfig& cfg = {}) {
  if (obs.frames.empty()) throw EmptyObservationError("fusion_baseline: no frames");
  FusionResult res;
  for (const auto& f : obs.frames) {
    res.interpolated.push_back(zero_fill_interpolate(f.image, f.spec.decim, cfg.sweeps));
    if (res.interpolated.back().shape() != obs.hr_shape)
      throw DimensionError("fusion_baseline: interpolated frame does not match HR shape");
  }
  const int radius = std::min<int>(cfg.search_radius,
                                   static_cast<int>(std::min(obs.hr_shape.height, obs.hr_shape.width)) - 1);
  for (const auto& img : res.interpolated)
    res.shifts.push_back(mad_register(res.interpolated.front(), img, radius).shift);
  res.fused = fuse(res.interpolated, res.shifts);
  return res;
}

// ---------------------------------------------------------------------------
// Metrics

inline void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* who) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(who) + ": shapes differ (" + to_string(a.shape()) + " vs " +
                         to_string(b.shape()) + ")");
}

// Mean absolute difference over all pixels.
inline double mad_metric(const ImageGrid& x, const ImageGrid& x_hat) {
  require_same_shape(x, x_hat, "mad_metric");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x.data()[i] - x_hat.data()[i]);
  return s / static_cast<double>(x.size());
}

inline double mse_metric(const ImageGrid& x, const ImageGrid& x_hat) {
  require_same_shape(x, x_hat, "mse_metric");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.data()[i] - x_hat.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(x.size());
}

// 10 log10(Var(clean) / noise_var), population variance.
inline double snr_db(const ImageGrid& clean, double noise_var) {
  if (!(noise_var > 0.0)) throw DomainError("snr_db: noise variance must be positive");
  return 10.0 * std::log10(variance(clean) / noise_var);
}

}  // namespace mfsr
