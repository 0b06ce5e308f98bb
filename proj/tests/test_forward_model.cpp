#include <gtest/gtest.h>

#include "support.hpp"

using namespace mfsr;
using testing_support::adjoint_mismatch;
using testing_support::max_abs_diff;
using testing_support::random_image;
using testing_support::random_lex;

namespace {

// Same-size zero-padded correlation written out directly.
ImageGrid correlate_reference(const ImageGrid& x, const Psf& p) {
  ImageGrid out(x.shape());
  const long H = static_cast<long>(x.height()), W = static_cast<long>(x.width());
  for (long r = 0; r < H; ++r)
    for (long c = 0; c < W; ++c) {
      double s = 0.0;
      for (long i = -2; i <= 2; ++i)
        for (long j = -2; j <= 2; ++j) {
          const long rr = r + i, cc = c + j;
          if (rr < 0 || cc < 0 || rr >= H || cc >= W) continue;
          s += p.tap(static_cast<std::size_t>(i + 2), static_cast<std::size_t>(j + 2)) *
               x(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        }
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = s;
    }
  return out;
}

std::vector<LinearOperator> operator_zoo(Shape s) {
  std::vector<LinearOperator> ops;
  ops.push_back(identity_op(s));
  for (int id = 1; id <= 8; ++id) ops.push_back(blur_op(make_kernel(id), s));
  ops.push_back(warp_op(2, -1, s));
  ops.push_back(warp_op(0.5, 0.25, s));
  ops.push_back(warp_op(-1.75, 1.3, s));
  for (std::size_t r : {2u, 4u})
    if (s.height % r == 0 && s.width % r == 0) ops.push_back(decimate_op(r, s));
  ops.push_back(compose({blur_op(make_kernel(3), s), warp_op(0.5, 1.5, s), decimate_op(2, s)}));
  return ops;
}

}  // namespace

TEST(Blur, DeltaKernelIsIdentity) {
  std::mt19937_64 rng(1);
  const auto x = random_image({9, 11}, rng);
  EXPECT_EQ(from_lex(blur_op(Psf::delta(), x.shape()).apply(to_lex(x))), x);
}

TEST(Blur, UniformKernelOnConstant) {
  const ImageGrid x(10, 10, 50.0);
  const auto y = from_lex(blur_op(make_kernel(5), x.shape()).apply(to_lex(x)));
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < 10; ++c) {
      const bool interior = r >= 2 && r <= 7 && c >= 2 && c <= 7;
      if (interior) {
        EXPECT_NEAR(y(r, c), 50.0, 1e-12);
      } else {
        EXPECT_LT(y(r, c), 50.0);
      }
    }
  // Corner: 3x3 of the 25 taps fall inside.
  EXPECT_NEAR(y(0, 0), 50.0 * 9.0 / 25.0, 1e-12);
  EXPECT_NEAR(y(0, 5), 50.0 * 15.0 / 25.0, 1e-12);
}

TEST(Blur, MatchesDirectCorrelationAndDenseOracle) {
  std::mt19937_64 rng(2);
  const auto x = random_image({8, 8}, rng);
  const auto B = blur_op(make_kernel(2), x.shape());
  const auto y = B.apply(to_lex(x));
  EXPECT_LT(max_abs_diff(y.values, to_lex(correlate_reference(x, make_kernel(2))).values), 1e-12);
  const auto M = dense_materialize(B);
  EXPECT_LT(max_abs_diff(testing_support::matvec(M, to_lex(x).values), y.values), 1e-10);
}

TEST(Blur, TooSmallThrows) { EXPECT_THROW(blur_op(make_kernel(1), {4, 8}), DimensionError); }

TEST(Blur, PreservesSumAwayFromBoundary) {
  ImageGrid x(16, 16);
  std::mt19937_64 rng(4);
  for (std::size_t r = 4; r < 12; ++r)
    for (std::size_t c = 4; c < 12; ++c) x(r, c) = std::uniform_real_distribution<double>(0, 10)(rng);
  for (int id = 1; id <= 8; ++id) {
    const auto y = blur_op(make_kernel(id), x.shape()).apply(to_lex(x));
    double sx = 0, sy = 0;
    for (double v : x.data()) sx += v;
    for (double v : y.values) sy += v;
    EXPECT_NEAR(sx, sy, 1e-9 * sx);
  }
}

TEST(Warp, ZeroShiftIsIdentity) {
  std::mt19937_64 rng(5);
  const auto x = random_image({7, 9}, rng);
  EXPECT_EQ(from_lex(warp_op(0, 0, x.shape()).apply(to_lex(x))), x);
}

TEST(Warp, IntegerShiftMovesDelta) {
  ImageGrid x(10, 10);
  x(4, 3) = 5.0;
  const auto y = from_lex(warp_op(3, 2, x.shape()).apply(to_lex(x)));
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < 10; ++c) EXPECT_EQ(y(r, c), (r == 6 && c == 6) ? 5.0 : 0.0);
}

TEST(Warp, HalfPixelSplitsMass) {
  ImageGrid x(3, 7);
  x(1, 3) = 1.0;
  const auto y = from_lex(warp_op(0.5, 0, x.shape()).apply(to_lex(x)));
  EXPECT_DOUBLE_EQ(y(1, 3), 0.5);
  EXPECT_DOUBLE_EQ(y(1, 4), 0.5);
  double total = 0;
  for (double v : y.data()) total += v;
  EXPECT_DOUBLE_EQ(total, 1.0);
}

TEST(Warp, ShiftTooLargeThrows) {
  EXPECT_THROW(warp_op(8, 0, {8, 16}), DimensionError);
  EXPECT_THROW(warp_op(0, -9, {16, 8}), DimensionError);
}

TEST(Decimate, SamplesTopLeftPhase) {
  ImageGrid x(9, 9);
  for (std::size_t r = 0; r < 9; ++r)
    for (std::size_t c = 0; c < 9; ++c) x(r, c) = static_cast<double>(10 * r + c);
  const auto D = decimate_op(3, x.shape());
  EXPECT_EQ(D.out_shape(), (Shape{3, 3}));
  const auto y = from_lex(D.apply(to_lex(x)));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(y(r, c), x(3 * r, 3 * c));
}

TEST(Decimate, DDtIsIdentityAndDtDProjects) {
  std::mt19937_64 rng(6);
  for (std::size_t r : {2u, 3u, 4u}) {
    const Shape s{12, 24};
    const auto D = decimate_op(r, s);
    const auto y = random_lex(D.out_shape(), rng);
    EXPECT_EQ(D.apply(D.apply_adjoint(y)).values, y.values);
    const auto x = random_lex(s, rng);
    const auto p = D.apply_adjoint(D.apply(x));
    std::size_t zeroed = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] == 0.0) ++zeroed;
      else EXPECT_EQ(p[i], x[i]);
    }
    EXPECT_EQ(zeroed, s.size() - s.size() / (r * r));
  }
}

TEST(Decimate, DenseRowsHaveSingleOne) {
  const auto M = dense_materialize(decimate_op(2, {4, 4}));
  EXPECT_EQ(M.rows, 4u);
  for (std::size_t i = 0; i < M.rows; ++i) {
    double sum = 0;
    int ones = 0;
    for (std::size_t j = 0; j < M.cols; ++j) {
      sum += M(i, j);
      ones += M(i, j) == 1.0;
    }
    EXPECT_EQ(ones, 1);
    EXPECT_EQ(sum, 1.0);
  }
}

TEST(Decimate, NonDividingFactorThrows) { EXPECT_THROW(decimate_op(3, {8, 9}), DimensionError); }

TEST(Compose, SingleIdentity) {
  std::mt19937_64 rng(7);
  const auto x = random_lex({5, 5}, rng);
  EXPECT_EQ(compose({identity_op({5, 5})}).apply(x).values, x.values);
}

TEST(Compose, DimensionMismatchThrows) {
  EXPECT_THROW(compose({decimate_op(2, {8, 8}), blur_op(make_kernel(1), {8, 8})}), DimensionError);
}

TEST(Compose, EqualsDenseProduct) {
  const Shape s{8, 8};
  const auto B = blur_op(make_kernel(7), s);
  const auto M = warp_op(1.25, -0.5, s);
  const auto D = decimate_op(2, s);
  const auto H = compose({B, M, D});
  const auto dB = dense_materialize(B), dM = dense_materialize(M), dD = dense_materialize(D);
  const auto dH = dense_materialize(H);
  ASSERT_EQ(dH.rows, 16u);
  ASSERT_EQ(dH.cols, 64u);
  for (std::size_t i = 0; i < dH.rows; ++i)
    for (std::size_t j = 0; j < dH.cols; ++j) {
      double v = 0.0;
      for (std::size_t a = 0; a < 64; ++a) {
        if (dD(i, a) == 0.0) continue;
        for (std::size_t b = 0; b < 64; ++b) v += dD(i, a) * dM(a, b) * dB(b, j);
      }
      EXPECT_NEAR(dH(i, j), v, 1e-12);
    }
}

TEST(Adjoint, RandomizedPairingAllKinds) {
  std::mt19937_64 rng(8);
  for (Shape s : {Shape{8, 8}, Shape{16, 16}, Shape{12, 20}, Shape{32, 32}}) {
    for (const auto& op : operator_zoo(s))
      for (int t = 0; t < 100; ++t) ASSERT_LT(adjoint_mismatch(op, rng), 1e-12) << describe(op.descriptor());
  }
}

TEST(Adjoint, DenseTransposeEqualsDenseAdjoint) {
  for (const auto& op : operator_zoo({8, 8})) {
    const auto fwd = dense_materialize(op).transposed();
    const auto adj = dense_materialize(op.adjoint());
    ASSERT_EQ(fwd.rows, adj.rows);
    EXPECT_LT(max_abs_diff(fwd.data, adj.data), 1e-12) << describe(op.descriptor());
  }
}

TEST(Adjoint, Linearity) {
  std::mt19937_64 rng(10);
  for (const auto& op : operator_zoo({16, 16})) {
    const auto x = random_lex(op.in_shape(), rng), y = random_lex(op.in_shape(), rng);
    LexVector z(op.in_shape());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = 2.5 * x[i] - 0.75 * y[i];
    const auto az = op.apply(z), ax = op.apply(x), ay = op.apply(y);
    for (std::size_t i = 0; i < az.size(); ++i) EXPECT_NEAR(az[i], 2.5 * ax[i] - 0.75 * ay[i], 1e-10);
  }
}

TEST(Dense, IdentityMatrix) {
  const auto M = dense_materialize(identity_op({2, 2}));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(M(i, j), i == j ? 1.0 : 0.0);
}

TEST(Dense, SizeCap) { EXPECT_THROW(dense_materialize(identity_op({64, 64})), SizeCapError); }

TEST(Dense, WrappedMatrixRoundTrips) {
  std::mt19937_64 rng(12);
  const auto A = testing_support::random_spd(9, rng);
  const auto op = dense_operator(A, {3, 3}, {3, 3}, "spd");
  EXPECT_LT(max_abs_diff(dense_materialize(op).data, A.data), 1e-15);
  EXPECT_LT(adjoint_mismatch(op, rng), 1e-12);
}

TEST(Noise, InfiniteSnrIsIdentity) {
  std::mt19937_64 rng(13);
  const auto x = random_image({16, 16}, rng);
  EXPECT_EQ(add_noise(x, kNoiselessSnr, 1), x);
}

TEST(Noise, ZeroDbMatchesSignalVariance) {
  const auto x = synth_texture(128, 128, 3);
  const auto y = add_noise(x, 0.0, 77);
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mse += (y.data()[i] - x.data()[i]) * (y.data()[i] - x.data()[i]);
  mse /= static_cast<double>(x.size());
  EXPECT_NEAR(mse / variance(x), 1.0, 0.05);
}

TEST(Noise, TenDbWithinFifteenPercent) {
  const auto x = synth_texture(64, 64, 2);
  const auto y = add_noise(x, 10.0, 5);
  const double target = variance(x) * 0.1;
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mse += (y.data()[i] - x.data()[i]) * (y.data()[i] - x.data()[i]);
  mse /= static_cast<double>(x.size());
  EXPECT_NEAR(mse, target, 0.15 * target);
}

TEST(Noise, SameSeedBitIdentical) {
  const auto x = synth_texture(32, 32, 4);
  EXPECT_EQ(add_noise(x, 15.0, 99), add_noise(x, 15.0, 99));
  EXPECT_NE(add_noise(x, 15.0, 99), add_noise(x, 15.0, 100));
}

TEST(Noise, ConstantImageRejected) {
  EXPECT_THROW(add_noise(ImageGrid(8, 8, 3.0), 20.0, 1), DegenerateSignalError);
  EXPECT_NO_THROW(add_noise(ImageGrid(8, 8, 3.0), kNoiselessSnr, 1));
}

TEST(FrameSeeds, AddingFramesKeepsEarlierSeeds) {
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(derive_frame_seed(2011, k), derive_frame_seed(2011, k));
  EXPECT_NE(derive_frame_seed(2011, 0), derive_frame_seed(2011, 1));
  EXPECT_NE(derive_frame_seed(2011, 0), derive_frame_seed(2012, 0));
}

TEST(Simulate, IdentityFrameEqualsInput) {
  std::mt19937_64 rng(14);
  const auto hr = random_image({12, 12}, rng);
  FrameSpec spec{kDeltaPsf, 0.0, 0.0, 1, kNoiselessSnr, 0};
  const auto obs = simulate_observations(hr, {spec});
  ASSERT_EQ(obs.frames.size(), 1u);
  EXPECT_EQ(obs.frames[0].image, hr);
}

TEST(Simulate, FrameMatchesOperatorChain) {
  const auto hr = synth_texture(32, 32, 8);
  FrameSpec spec{3, 0.5, -1.0, 2, 25.0, 42};
  const auto obs = simulate_observations(hr, {spec});
  const auto H = compose({blur_op(make_kernel(3), hr.shape()), warp_op(0.5, -1.0, hr.shape()), decimate_op(2, hr.shape())});
  const auto expected = add_noise(from_lex(H.apply(to_lex(hr))), 25.0, 42);
  EXPECT_EQ(obs.frames[0].image, expected);
}

TEST(Simulate, EightFrameScheduleNoiseOrdering) {
  const auto hr = synth_texture(64, 64, 1);
  const double snrs[] = {100, 50, 10, 20, 15, 30, 50, 10};
  std::vector<FrameSpec> specs;
  for (int k = 0; k < 8; ++k) specs.push_back({k + 1, 0.0, 0.0, 2, snrs[k], derive_frame_seed(1, k)});
  const auto obs = simulate_observations(hr, specs);
  ASSERT_EQ(obs.size(), 8u);
  std::vector<double> var;
  for (int k = 0; k < 8; ++k) {
    EXPECT_EQ(obs.frames[k].image.shape(), (Shape{32, 32}));
    const auto clean = from_lex(observation_operator(specs[k], hr.shape()).apply(to_lex(hr)));
    double v = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const double d = obs.frames[k].image.data()[i] - clean.data()[i];
      v += d * d;
    }
    var.push_back(v / static_cast<double>(clean.size()));
  }
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b)
      if (snrs[a] < snrs[b]) EXPECT_GT(var[a], var[b]) << a << " vs " << b;
}

TEST(Simulate, FactorFourOn256) {
  const auto hr = synth_texture(256, 256, 2);
  FrameSpec spec{1, 1.0, 2.0, 4, 30.0, 3};
  const auto obs = simulate_observations(hr, {spec});
  EXPECT_EQ(obs.frames[0].image.shape(), (Shape{64, 64}));
}

TEST(Simulate, InvalidSpecRejected) {
  const auto hr = synth_texture(30, 30, 2);
  EXPECT_THROW(simulate_observations(hr, {FrameSpec{1, 0, 0, 4, kNoiselessSnr, 0}}), DimensionError);
  EXPECT_THROW(simulate_observations(hr, {FrameSpec{9, 0, 0, 2, kNoiselessSnr, 0}}), UnknownKernelError);
}
