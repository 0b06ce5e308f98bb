#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mfsr/errors.hpp"
#include "mfsr/image.hpp"

namespace mfsr {

namespace op {
struct Identity {};
struct Blur { int psf_id; };
struct Warp { double dx, dy; };
struct Decimate { std::size_t factor; };
struct Composite { std::size_t factors; };
struct DiffH {};
struct DiffV {};
struct Custom { std::string name; };
}  // namespace op

using OperatorDescriptor = std::variant<op::Identity, op::Blur, op::Warp, op::Decimate,
                                        op::Composite, op::DiffH, op::DiffV, op::Custom>;

inline std::string describe(const OperatorDescriptor& d) {
  struct Visitor {
    std::string operator()(const op::Identity&) const { return "Identity"; }
    std::string operator()(const op::Blur& b) const { return "Blur(ker" + std::to_string(b.psf_id) + ")"; }
    std::string operator()(const op::Warp& w) const {
      return "Warp(" + std::to_string(w.dx) + "," + std::to_string(w.dy) + ")";
    }
    std::string operator()(const op::Decimate& d) const { return "Decimate(" + std::to_string(d.factor) + ")"; }
    std::string operator()(const op::Composite& c) const { return "Composite(" + std::to_string(c.factors) + ")"; }
    std::string operator()(const op::DiffH&) const { return "DiffH"; }
    std::string operator()(const op::DiffV&) const { return "DiffV"; }
    std::string operator()(const op::Custom& c) const { return c.name; }
  };
  return std::visit(Visitor{}, d);
}

// Matrix-free linear map between lexicographic vectors. Immutable; copies
// share the underlying kernels.
class LinearOperator {
 public:
  // Writes the image of `in` into `out`; `out` is sized but not zeroed.
  using Kernel = std::function<void(std::span<const double> in, std::span<double> out)>;

  LinearOperator(Shape in_shape, Shape out_shape, OperatorDescriptor descriptor, Kernel apply,
                 Kernel apply_adjoint)
      : in_shape_(in_shape),
        out_shape_(out_shape),
        descriptor_(std::move(descriptor)),
        apply_(std::make_shared<const Kernel>(std::move(apply))),
        adjoint_(std::make_shared<const Kernel>(std::move(apply_adjoint))) {}

  const Shape& in_shape() const { return in_shape_; }
  const Shape& out_shape() const { return out_shape_; }
  std::size_t in_len() const { return in_shape_.size(); }
  std::size_t out_len() const { return out_shape_.size(); }
  const OperatorDescriptor& descriptor() const { return descriptor_; }

  void apply_into(std::span<const double> in, std::span<double> out) const {
    check(in.size(), in_len(), out.size(), out_len());
    (*apply_)(in, out);
  }
  void apply_adjoint_into(std::span<const double> in, std::span<double> out) const {
    check(in.size(), out_len(), out.size(), in_len());
    (*adjoint_)(in, out);
  }

  LexVector apply(const LexVector& x) const {
    LexVector y(out_shape_);
    apply_into(x.values, y.values);
    return y;
  }
  LexVector apply_adjoint(const LexVector& y) const {
    LexVector x(in_shape_);
    apply_adjoint_into(y.values, x.values);
    return x;
  }

  // The transpose as an operator in its own right.
  LinearOperator adjoint() const {
    LinearOperator t = *this;
    std::swap(t.in_shape_, t.out_shape_);
    std::swap(t.apply_, t.adjoint_);
    t.descriptor_ = op::Custom{"Adjoint(" + describe(descriptor_) + ")"};
    return t;
  }

 private:
  static void check(std::size_t in, std::size_t want_in, std::size_t out, std::size_t want_out) {
    if (in != want_in || out != want_out)
      throw DimensionError("operator expects " + std::to_string(want_in) + " -> " +
                           std::to_string(want_out) + ", got " + std::to_string(in) + " -> " +
                           std::to_string(out));
  }

  Shape in_shape_;
  Shape out_shape_;
  OperatorDescriptor descriptor_;
  std::shared_ptr<const Kernel> apply_;
  std::shared_ptr<const Kernel> adjoint_;
};

inline LinearOperator identity_op(Shape shape) {
  auto copy = [](std::span<const double> in, std::span<double> out) {
    std::copy(in.begin(), in.end(), out.begin());
  };
  return LinearOperator(shape, shape, op::Identity{}, copy, copy);
}

// Same-size 2-D correlation with zero padding. The adjoint correlates with
// the flipped kernel.
inline LinearOperator blur_op(const Psf& psf, Shape shape) {
  if (shape.height < Psf::kSize || shape.width < Psf::kSize)
    throw DimensionError("blur_op: image " + to_string(shape) + " smaller than 5x5 kernel");
  const auto H = static_cast<std::ptrdiff_t>(shape.height);
  const auto W = static_cast<std::ptrdiff_t>(shape.width);
  constexpr auto R = static_cast<std::ptrdiff_t>(Psf::kRadius);

  auto correlate = [psf, H, W](bool flipped) {
    return [psf, H, W, flipped](std::span<const double> in, std::span<double> out) {
      for (std::ptrdiff_t c = 0; c < W; ++c)
        for (std::ptrdiff_t r = 0; r < H; ++r) {
          double acc = 0.0;
          for (std::ptrdiff_t j = -R; j <= R; ++j) {
            const std::ptrdiff_t cc = flipped ? c - j : c + j;
            if (cc < 0 || cc >= W) continue;
            for (std::ptrdiff_t i = -R; i <= R; ++i) {
              const std::ptrdiff_t rr = flipped ? r - i : r + i;
              if (rr < 0 || rr >= H) continue;
              const double t = psf.tap(static_cast<std::size_t>(i + R), static_cast<std::size_t>(j + R));
              if (t != 0.0) acc += t * in[static_cast<std::size_t>(cc * H + rr)];
            }
          }
          out[static_cast<std::size_t>(c * H + r)] = acc;
        }
    };
  };
  return LinearOperator(shape, shape, op::Blur{psf.id}, correlate(false), correlate(true));
}

// Global translation by (dx columns, dy rows) with bilinear interpolation and
// zero fill: out(r, c) = in(r - dy, c - dx).
inline LinearOperator warp_op(double dx, double dy, Shape shape) {
  const double limit = static_cast<double>(std::min(shape.height, shape.width));
  if (!std::isfinite(dx) || !std::isfinite(dy) || std::abs(dx) >= limit || std::abs(dy) >= limit)
    throw DimensionError("warp_op: shift exceeds image extent");
  const auto H = static_cast<std::ptrdiff_t>(shape.height);
  const auto W = static_cast<std::ptrdiff_t>(shape.width);
  const double fx0 = std::floor(-dx), fy0 = std::floor(-dy);
  const auto ox = static_cast<std::ptrdiff_t>(fx0);
  const auto oy = static_cast<std::ptrdiff_t>(fy0);
  const double fx = -dx - fx0, fy = -dy - fy0;
  // Source cell (r + oy + a, c + ox + b) carries weight wy[a] * wx[b].
  const double wx[2] = {1.0 - fx, fx};
  const double wy[2] = {1.0 - fy, fy};

  auto forward = [=](std::span<const double> in, std::span<double> out) {
    for (std::ptrdiff_t c = 0; c < W; ++c)
      for (std::ptrdiff_t r = 0; r < H; ++r) {
        double acc = 0.0;
        for (int b = 0; b < 2; ++b) {
          const std::ptrdiff_t sc = c + ox + b;
          if (wx[b] == 0.0 || sc < 0 || sc >= W) continue;
          for (int a = 0; a < 2; ++a) {
            const std::ptrdiff_t sr = r + oy + a;
            if (wy[a] == 0.0 || sr < 0 || sr >= H) continue;
            acc += wy[a] * wx[b] * in[static_cast<std::size_t>(sc * H + sr)];
          }
        }
        out[static_cast<std::size_t>(c * H + r)] = acc;
      }
  };
  auto adjoint = [=](std::span<const double> in, std::span<double> out) {
    for (std::ptrdiff_t c = 0; c < W; ++c)
      for (std::ptrdiff_t r = 0; r < H; ++r) {
        double acc = 0.0;
        for (int b = 0; b < 2; ++b) {
          const std::ptrdiff_t tc = c - ox - b;
          if (wx[b] == 0.0 || tc < 0 || tc >= W) continue;
          for (int a = 0; a < 2; ++a) {
            const std::ptrdiff_t tr = r - oy - a;
            if (wy[a] == 0.0 || tr < 0 || tr >= H) continue;
            acc += wy[a] * wx[b] * in[static_cast<std::size_t>(tc * H + tr)];
          }
        }
        out[static_cast<std::size_t>(c * H + r)] = acc;
      }
  };
  return LinearOperator(shape, shape, op::Warp{dx, dy}, forward, adjoint);
}

// Keeps the top-left pixel of every factor x factor block. The adjoint
// zero-fills back onto the full grid.
inline LinearOperator decimate_op(std::size_t factor, Shape shape) {
  if (factor == 0 || shape.height % factor != 0 || shape.width % factor != 0)
    throw DimensionError("decimate_op: factor " + std::to_string(factor) + " does not divide " +
                         to_string(shape));
  const Shape low{shape.height / factor, shape.width / factor};
  const std::size_t H = shape.height;
  const std::size_t h = low.height, w = low.width;

  auto forward = [=](std::span<const double> in, std::span<double> out) {
    for (std::size_t c = 0; c < w; ++c)
      for (std::size_t r = 0; r < h; ++r) out[c * h + r] = in[(c * factor) * H + r * factor];
  };
  auto adjoint = [=](std::span<const double> in, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t c = 0; c < w; ++c)
      for (std::size_t r = 0; r < h; ++r) out[(c * factor) * H + r * factor] = in[c * h + r];
  };
  return LinearOperator(shape, low, op::Decimate{factor}, forward, adjoint);
}

// Applies ops[0] first and ops.back() last.
inline LinearOperator compose(std::vector<LinearOperator> ops) {
  if (ops.empty()) throw DimensionError("compose: empty operator list");
  for (std::size_t i = 1; i < ops.size(); ++i)
    if (ops[i].in_len() != ops[i - 1].out_len())
      throw DimensionError("compose: " + describe(ops[i - 1].descriptor()) + " outputs " +
                           std::to_string(ops[i - 1].out_len()) + " but " +
                           describe(ops[i].descriptor()) + " expects " +
                           std::to_string(ops[i].in_len()));
  const Shape in = ops.front().in_shape();
  const Shape out = ops.back().out_shape();
  const std::size_t n = ops.size();
  auto chain = std::make_shared<const std::vector<LinearOperator>>(std::move(ops));

  auto forward = [chain](std::span<const double> x, std::span<double> y) {
    std::vector<double> cur(x.begin(), x.end()), next;
    for (std::size_t i = 0; i + 1 < chain->size(); ++i) {
      next.assign((*chain)[i].out_len(), 0.0);
      (*chain)[i].apply_into(cur, next);
      cur.swap(next);
    }
    chain->back().apply_into(cur, y);
  };
  auto adjoint = [chain](std::span<const double> y, std::span<double> x) {
    std::vector<double> cur(y.begin(), y.end()), next;
    for (std::size_t i = chain->size() - 1; i > 0; --i) {
      next.assign((*chain)[i].in_len(), 0.0);
      (*chain)[i].apply_adjoint_into(cur, next);
      cur.swap(next);
    }
    chain->front().apply_adjoint_into(cur, x);
  };
  return LinearOperator(in, out, op::Composite{n}, forward, adjoint);
}

// ---------------------------------------------------------------------------
// Dense materialization, for small test-sized problems only.

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  DenseMatrix transposed() const {
    DenseMatrix t(cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
  }
};

inline constexpr std::size_t kDenseCap = std::size_t{1} << 22;

// Column j is apply(e_j).
inline DenseMatrix dense_materialize(const LinearOperator& A) {
  if (A.in_len() * A.out_len() > kDenseCap)
    throw SizeCapError("dense_materialize: " + std::to_string(A.out_len()) + "x" +
                       std::to_string(A.in_len()) + " exceeds cap");
  DenseMatrix M(A.out_len(), A.in_len());
  std::vector<double> e(A.in_len(), 0.0), col(A.out_len());
  for (std::size_t j = 0; j < A.in_len(); ++j) {
    e[j] = 1.0;
    A.apply_into(e, col);
    e[j] = 0.0;
    for (std::size_t i = 0; i < A.out_len(); ++i) M(i, j) = col[i];
  }
  return M;
}

inline LinearOperator dense_operator(DenseMatrix M, Shape in_shape, Shape out_shape,
                                     std::string name = "Dense") {
  if (in_shape.size() != M.cols || out_shape.size() != M.rows)
    throw DimensionError("dense_operator: shape does not match matrix");
  auto m = std::make_shared<const DenseMatrix>(std::move(M));
  auto forward = [m](std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < m->rows; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m->cols; ++j) acc += (*m)(i, j) * x[j];
      y[i] = acc;
    }
  };
  auto adjoint = [m](std::span<const double> y, std::span<double> x) {
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t i = 0; i < m->rows; ++i)
      for (std::size_t j = 0; j < m->cols; ++j) x[j] += (*m)(i, j) * y[i];
  };
  return LinearOperator(in_shape, out_shape, op::Custom{std::move(name)}, forward, adjoint);
}

}  // namespace mfsr
