#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace mfsr;
using testing_support::random_image;

TEST(LexOrder, TwoByTwoIsColumnMajor) {
  const auto img = ImageGrid::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(to_lex(img).values, (std::vector<double>{1, 3, 2, 4}));
}

TEST(LexOrder, SinglePixel) {
  const auto v = to_lex(ImageGrid::from_rows({{7}}));
  EXPECT_EQ(v.values, std::vector<double>{7});
  EXPECT_EQ(v.shape, (Shape{1, 1}));
}

TEST(LexOrder, InverseOfExample) {
  const auto img = from_lex(LexVector(Shape{2, 2}, {1, 3, 2, 4}));
  EXPECT_EQ(img, ImageGrid::from_rows({{1, 2}, {3, 4}}));
}

TEST(LexOrder, LengthMismatchThrows) {
  EXPECT_THROW(from_lex(LexVector(Shape{2, 2}, {1, 2, 3, 4, 5})), DimensionError);
}

TEST(LexOrder, RoundTripRandomShapes) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 256);
  for (int trial = 0; trial < 25; ++trial) {
    const Shape s{dim(rng), dim(rng)};
    const auto img = random_image(s, rng);
    EXPECT_EQ(from_lex(to_lex(img)), img);
    const auto v = testing_support::random_lex(s, rng);
    const auto back = to_lex(from_lex(v));
    EXPECT_EQ(back.values, v.values);
  }
}

TEST(LexOrder, ElementPlacementMatchesIndexFormula) {
  std::mt19937_64 rng(3);
  const auto img = random_image({5, 7}, rng);
  const auto v = to_lex(img);
  for (std::size_t c = 0; c < 7; ++c)
    for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(v.values[c * 5 + r], img(r, c));
}

TEST(ImageGrid, ZeroDimensionRejected) {
  EXPECT_THROW(ImageGrid(0, 4), DimensionError);
  EXPECT_THROW(ImageGrid(4, 0), DimensionError);
}

namespace {

// Kernel listings as printed, parsed independently of the library tables.
struct Listed {
  int id;
  int denom;
  const char* rows;
};

const Listed kListed[] = {
    {1, 19, "0 0 1 0 0; 0 1 2 1 0; 1 2 3 2 1; 0 1 2 1 0; 0 0 1 0 0"},
    {2, 14, "0 0 0 0 0; 0 1 2 1 0; 0 2 2 2 0; 0 1 2 1 0; 0 0 0 0 0"},
    {3, 16, "0 0 0 0 0; 0 1 2 1 0; 0 2 4 2 0; 0 1 2 1 0; 0 0 0 0 0"},
    {4, 18, "0 0 0 0 0; 0 1 2 1 0; 1 2 2 2 1; 0 1 2 1 0; 0 0 0 0 0"},
    {5, 25, "1 1 1 1 1; 1 1 1 1 1; 1 1 1 1 1; 1 1 1 1 1; 1 1 1 1 1"},
    {6, 18, "0 0 0 0 0; 0 2 2 2 0; 0 2 2 2 0; 0 2 2 2 0; 0 0 0 0 0"},
    {7, 28, "0 1 1 1 0; 1 1 2 1 1; 1 2 4 2 1; 1 1 2 1 1; 0 1 1 1 0"},
    {8, 26, "0 1 1 1 0; 1 1 2 1 1; 1 2 2 2 1; 1 1 2 1 1; 0 1 1 1 0"},
};

std::vector<double> parse_listing(const char* text) {
  std::string s(text);
  for (auto& ch : s)
    if (ch == ';') ch = ' ';
  std::istringstream in(s);
  std::vector<double> out;
  for (double v; in >> v;) out.push_back(v);
  return out;
}

}  // namespace

TEST(KernelBank, MatchesListingsUpToNormalization) {
  for (const auto& k : kListed) {
    const auto raw = parse_listing(k.rows);
    ASSERT_EQ(raw.size(), 25u);
    double total = 0.0;
    for (double v : raw) total += v;
    const Psf p = make_kernel(k.id);
    EXPECT_EQ(p.id, k.id);
    for (std::size_t i = 0; i < 25; ++i) EXPECT_NEAR(p.taps[i], raw[i] / total, 1e-15) << "kernel " << k.id;
    if (k.id == 4) {
      EXPECT_EQ(total, 16.0);
    } else {
      EXPECT_EQ(total, k.denom) << "kernel " << k.id;
      for (std::size_t i = 0; i < 25; ++i) EXPECT_NEAR(p.taps[i], raw[i] / k.denom, 1e-15);
    }
  }
}

TEST(KernelBank, Kernel5IsUniform) {
  const Psf p = make_kernel(5);
  for (double t : p.taps) EXPECT_DOUBLE_EQ(t, 1.0 / 25.0);
}

TEST(KernelBank, Kernel3Center) { EXPECT_DOUBLE_EQ(make_kernel(3).tap(2, 2), 4.0 / 16.0); }

TEST(KernelBank, Kernel1RawTotal) { EXPECT_EQ(kernel_tap_total(1), 19); }

TEST(KernelBank, AllNormalizedAndNonNegative) {
  for (int id = 1; id <= 8; ++id) {
    const Psf p = make_kernel(id);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    for (double t : p.taps) EXPECT_GE(t, 0.0);
  }
}

TEST(KernelBank, OutOfRangeThrows) {
  EXPECT_THROW(make_kernel(0), UnknownKernelError);
  EXPECT_THROW(make_kernel(9), UnknownKernelError);
}

TEST(SynthRectangle, ForegroundCountEqualsArea) {
  const auto img = synth_rectangle(128, 128, {32, 32, 48, 48}, 255, 0);
  int fg = 0;
  for (double v : img.data()) fg += v == 255.0;
  EXPECT_EQ(fg, 48 * 48);
}

TEST(SynthRectangle, FullCoverIsConstant) {
  const auto img = synth_rectangle(6, 9, {0, 0, 6, 9}, 42, 0);
  for (double v : img.data()) EXPECT_EQ(v, 42.0);
}

TEST(SynthRectangle, SmallCaseByHand) {
  const auto img = synth_rectangle(4, 4, {1, 1, 2, 2}, 1, 0);
  EXPECT_EQ(img, ImageGrid::from_rows({{0, 0, 0, 0}, {0, 1, 1, 0}, {0, 1, 1, 0}, {0, 0, 0, 0}}));
}

TEST(SynthRectangle, OutOfBoundsThrows) {
  EXPECT_THROW(synth_rectangle(8, 8, {4, 4, 5, 2}, 1, 0), DimensionError);
  EXPECT_THROW(synth_rectangle(8, 8, {0, 7, 1, 2}, 1, 0), DimensionError);
}

TEST(SynthTexture, DeterministicAndInRange) {
  const auto a = synth_texture(64, 48, 5);
  EXPECT_EQ(a, synth_texture(64, 48, 5));
  EXPECT_NE(a, synth_texture(64, 48, 6));
  for (double v : a.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 255.0);
  }
  EXPECT_GT(variance(a), 100.0);
}

TEST(Pgm, AsciiExample) {
  const auto img = read_pgm("P2\n2 2\n255\n0 255 128 64");
  EXPECT_EQ(img, ImageGrid::from_rows({{0, 255}, {128, 64}}));
}

TEST(Pgm, CommentsBetweenTokens) {
  const auto img = read_pgm("P2 # magic\n# size next\n3 # width\n1\n# maxval\n9\n1 2 3\n");
  EXPECT_EQ(img, ImageGrid::from_rows({{1, 2, 3}}));
}

TEST(Pgm, ZeroImageRoundTrip) {
  const ImageGrid z(8, 8);
  EXPECT_EQ(read_pgm(write_pgm(z)), z);
  EXPECT_EQ(read_pgm(write_pgm(z, PgmMode::Ascii)), z);
}

TEST(Pgm, BinaryAndAsciiAgreeOnRandomIntegers) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> u(0, 255);
  ImageGrid img(16, 16);
  for (auto& v : img.data()) v = u(rng);
  const auto bin = read_pgm(write_pgm(img, PgmMode::Binary));
  const auto asc = read_pgm(write_pgm(img, PgmMode::Ascii));
  EXPECT_EQ(bin, img);
  EXPECT_EQ(asc, img);
}

TEST(Pgm, SixteenBitBigEndian) {
  ImageGrid img(2, 3);
  const double vals[] = {0, 1, 256, 1000, 65535, 300};
  for (std::size_t i = 0; i < 6; ++i) img.data()[i] = vals[i];
  const auto bytes = write_pgm(img, PgmMode::Binary, 65535);
  EXPECT_EQ(read_pgm(bytes), img);
  // Header "P5\n3 2\n65535\n" then first sample img(0,0)=0, second img(0,1)=256.
  const std::string header = "P5\n3 2\n65535\n";
  ASSERT_EQ(bytes.substr(0, header.size()), header);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 2]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 3]), 0u);
}

TEST(Pgm, WriteClampsThenRounds) {
  const auto img = ImageGrid::from_rows({{-5, 300, 127.5, 12.4}});
  EXPECT_EQ(read_pgm(write_pgm(img)), ImageGrid::from_rows({{0, 255, 128, 12}}));
}

TEST(Pgm, MalformedInputs) {
  EXPECT_THROW(read_pgm(""), FormatError);
  EXPECT_THROW(read_pgm("P3\n1 1\n255\n0"), FormatError);
  EXPECT_THROW(read_pgm("P2\n2 x\n255\n0 0 0 0"), FormatError);
  EXPECT_THROW(read_pgm("P2\n2 2\n0\n0 0 0 0"), FormatError);
  EXPECT_THROW(read_pgm("P2\n2 2\n70000\n0 0 0 0"), FormatError);
  EXPECT_THROW(read_pgm("P2\n2 2\n255\n0 0 0"), FormatError);
  EXPECT_THROW(read_pgm("P5\n2 2\n255\n\x01\x02\x03"), FormatError);
  EXPECT_THROW(read_pgm("P2\n1 1\n10\n11"), FormatError);
}
