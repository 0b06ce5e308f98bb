#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mfsr/errors.hpp"

namespace mfsr {

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return height * width; }
  bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width);
}

// Real-valued intensity field. Storage is column-major, so the flat buffer is
// already the lexicographic vector.
class ImageGrid {
 public:
  ImageGrid() = default;

  ImageGrid(std::size_t height, std::size_t width, double fill = 0.0)
      : shape_{height, width}, data_(checked_size(height, width), fill) {}

  ImageGrid(Shape shape, double fill = 0.0)
      : ImageGrid(shape.height, shape.width, fill) {}

  // Builds from row-major nested rows, which is how literals read naturally.
  static ImageGrid from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty())
      throw DimensionError("from_rows: empty grid");
    ImageGrid img(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != img.width())
        throw DimensionError("from_rows: ragged rows");
      for (std::size_t c = 0; c < img.width(); ++c) img(r, c) = rows[r][c];
    }
    return img;
  }

  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  const Shape& shape() const { return shape_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t row, std::size_t col) {
    return data_[col * shape_.height + row];
  }
  double operator()(std::size_t row, std::size_t col) const {
    return data_[col * shape_.height + row];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  bool operator==(const ImageGrid&) const = default;

 private:
  static std::size_t checked_size(std::size_t h, std::size_t w) {
    if (h == 0 || w == 0) throw DimensionError("image dimensions must be positive");
    return h * w;
  }

  Shape shape_;
  std::vector<double> data_;
};

// Column-major flattening of an ImageGrid that remembers its origin shape.
struct LexVector {
  Shape shape;
  std::vector<double> values;

  LexVector() = default;
  explicit LexVector(Shape s, double fill = 0.0) : shape(s), values(s.size(), fill) {}
  LexVector(Shape s, std::vector<double> v) : shape(s), values(std::move(v)) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  bool operator==(const LexVector&) const = default;
};

inline LexVector to_lex(const ImageGrid& img) {
  if (img.empty()) throw DimensionError("to_lex: empty image");
  return LexVector(img.shape(), img.values());
}

inline ImageGrid from_lex(const LexVector& v) {
  if (v.shape.height == 0 || v.shape.width == 0 || v.values.size() != v.shape.size())
    throw DimensionError("from_lex: length " + std::to_string(v.values.size()) +
                         " does not match shape " + to_string(v.shape));
  ImageGrid img(v.shape);
  std::copy(v.values.begin(), v.values.end(), img.data().begin());
  return img;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// ---------------------------------------------------------------------------
// Point spread functions

struct Psf {
  static constexpr std::size_t kSize = 5;
  static constexpr std::size_t kRadius = 2;

  int id = 0;  // 1..8 for the built-in bank, 0 for user kernels
  std::array<double, kSize * kSize> taps{};  // row-major

  double tap(std::size_t row, std::size_t col) const { return taps[row * kSize + col]; }

  double sum() const {
    double s = 0.0;
    for (double t : taps) s += t;
    return s;
  }

  static Psf delta() {
    Psf p;
    p.taps[kRadius * kSize + kRadius] = 1.0;
    return p;
  }
};

namespace detail {

using RawKernel = std::array<int, Psf::kSize * Psf::kSize>;

// Integer tap tables of the eight reference blur kernels.
inline constexpr std::array<RawKernel, 8> kKernelBank = {{
    {0, 0, 1, 0, 0, 0, 1, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1, 2, 1, 0, 0, 0, 1, 0, 0},
    {0, 0, 0, 0, 0, 0, 1, 2, 1, 0, 0, 2, 2, 2, 0, 0, 1, 2, 1, 0, 0, 0, 0, 0, 0},
    {0, 0, 0, 0, 0, 0, 1, 2, 1, 0, 0, 2, 4, 2, 0, 0, 1, 2, 1, 0, 0, 0, 0, 0, 0},
    {0, 0, 0, 0, 0, 0, 1, 2, 1, 0, 1, 2, 2, 2, 1, 0, 1, 2, 1, 0, 0, 0, 0, 0, 0},
    {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1},
    {0, 0, 0, 0, 0, 0, 2, 2, 2, 0, 0, 2, 2, 2, 0, 0, 2, 2, 2, 0, 0, 0, 0, 0, 0},
    {0, 1, 1, 1, 0, 1, 1, 2, 1, 1, 1, 2, 4, 2, 1, 1, 1, 2, 1, 1, 0, 1, 1, 1, 0},
    {0, 1, 1, 1, 0, 1, 1, 2, 1, 1, 1, 2, 2, 2, 1, 1, 1, 2, 1, 1, 0, 1, 1, 1, 0},
}};

}  // namespace detail

// Kernel `id` in 1..8. Each table is divided by the sum of its integer taps.
// For every kernel except 4 that sum equals the published prefactor; kernel 4
// is listed with 1/18 but its taps add up to 16, and is renormalized.
inline Psf make_kernel(int id) {
  if (id < 1 || id > 8)
    throw UnknownKernelError("unknown kernel id " + std::to_string(id) + " (expected 1..8)");
  const auto& raw = detail::kKernelBank[static_cast<std::size_t>(id - 1)];
  int total = 0;
  for (int t : raw) total += t;
  Psf p;
  p.id = id;
  for (std::size_t i = 0; i < raw.size(); ++i)
    p.taps[i] = static_cast<double>(raw[i]) / static_cast<double>(total);
  return p;
}

inline int kernel_tap_total(int id) {
  if (id < 1 || id > 8) throw UnknownKernelError("unknown kernel id " + std::to_string(id));
  int total = 0;
  for (int t : detail::kKernelBank[static_cast<std::size_t>(id - 1)]) total += t;
  return total;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

struct Rect {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

inline ImageGrid synth_rectangle(std::size_t h, std::size_t w, const Rect& rect,
                                 double fg, double bg) {
  if (rect.top + rect.height > h || rect.left + rect.width > w)
    throw DimensionError("synth_rectangle: rectangle does not fit in " +
                         std::to_string(h) + "x" + std::to_string(w));
  ImageGrid img(h, w, bg);
  for (std::size_t c = rect.left; c < rect.left + rect.width; ++c)
    for (std::size_t r = rect.top; r < rect.top + rect.height; ++r) img(r, c) = fg;
  return img;
}

// Piecewise-smooth test scene in [0, 255]: shaded background, a few flat
// patches and disks, smooth blobs and a grating. Deterministic for a seed.
inline ImageGrid synth_texture(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double H = static_cast<double>(h);
  const double W = static_cast<double>(w);

  ImageGrid img(h, w);
  const double gx = 40.0 * uni(rng), gy = 40.0 * uni(rng);
  for (std::size_t c = 0; c < w; ++c)
    for (std::size_t r = 0; r < h; ++r)
      img(r, c) = 60.0 + gx * (static_cast<double>(c) / W) + gy * (static_cast<double>(r) / H);

  for (int k = 0; k < 4; ++k) {
    const auto top = static_cast<std::size_t>(uni(rng) * 0.6 * H);
    const auto left = static_cast<std::size_t>(uni(rng) * 0.6 * W);
    const auto rh = std::max<std::size_t>(2, static_cast<std::size_t>((0.15 + 0.25 * uni(rng)) * H));
    const auto rw = std::max<std::size_t>(2, static_cast<std::size_t>((0.15 + 0.25 * uni(rng)) * W));
    const double level = 255.0 * uni(rng);
    for (std::size_t c = left; c < std::min(w, left + rw); ++c)
      for (std::size_t r = top; r < std::min(h, top + rh); ++r) img(r, c) = level;
  }

  for (int k = 0; k < 3; ++k) {
    const double cy = uni(rng) * H, cx = uni(rng) * W;
    const double rad = (0.08 + 0.12 * uni(rng)) * std::min(H, W);
    const double level = 255.0 * uni(rng);
    for (std::size_t c = 0; c < w; ++c)
      for (std::size_t r = 0; r < h; ++r) {
        const double dy = static_cast<double>(r) - cy, dx = static_cast<double>(c) - cx;
        if (dx * dx + dy * dy <= rad * rad) img(r, c) = level;
      }
  }

  for (int k = 0; k < 3; ++k) {
    const double cy = uni(rng) * H, cx = uni(rng) * W;
    const double sigma = (0.05 + 0.1 * uni(rng)) * std::min(H, W);
    const double amp = 80.0 * (uni(rng) - 0.5);
    for (std::size_t c = 0; c < w; ++c)
      for (std::size_t r = 0; r < h; ++r) {
        const double dy = static_cast<double>(r) - cy, dx = static_cast<double>(c) - cx;
        img(r, c) += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      }
  }

  const double period = 6.0 + 6.0 * uni(rng);
  const double theta = 3.14159265358979323846 * uni(rng);
  const auto g_top = static_cast<std::size_t>(0.55 * H);
  const auto g_left = static_cast<std::size_t>(0.1 * W);
  for (std::size_t c = g_left; c < std::min(w, g_left + w / 3); ++c)
    for (std::size_t r = g_top; r < std::min(h, g_top + h / 3); ++r) {
      const double t = std::cos(theta) * static_cast<double>(c) + std::sin(theta) * static_cast<double>(r);
      img(r, c) = 128.0 + 90.0 * std::sin(2.0 * 3.14159265358979323846 * t / period);
    }

  for (double& v : img.data()) v = std::clamp(v, 0.0, 255.0);
  return img;
}

}  // namespace mfsr
