#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "reboard/imaging/color.hpp"
#include "reboard/imaging/components.hpp"
#include "reboard/imaging/diff.hpp"
#include "reboard/imaging/filters.hpp"
#include "reboard/imaging/geometry.hpp"
#include "reboard/imaging/grids.hpp"
#include "reboard/imaging/png_io.hpp"
#include "support/oracles.hpp"

using namespace reboard;
using namespace reboard::imaging;
namespace rt = reboard::testing;

TEST(Grayscale, BlackAndWhite) {
  RawFrame black(8, 8);
  EXPECT_EQ(to_grayscale(black), GrayImage(8, 8, 0));
  RawFrame white(8, 8, std::vector<std::uint8_t>(8 * 8 * 3, 255));
  EXPECT_EQ(to_grayscale(white), GrayImage(8, 8, 255));
}

TEST(Grayscale, MatchesScalarWeightedSum) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> d(0, 255);
  for (int trial = 0; trial < 20; ++trial) {
    RawFrame f(8, 8);
    for (auto& p : f.pixels) p = static_cast<std::uint8_t>(d(rng));
    const GrayImage g = to_grayscale(f);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        const auto* px = f.at(x, y);
        // 299R+587G+114B is an exact integer, so /1000 + 0.5 floors exactly.
        const double expect = std::floor((299.0 * px[0] + 587.0 * px[1] + 114.0 * px[2]) / 1000.0 + 0.5);
        ASSERT_EQ(g(x, y), static_cast<int>(expect)) << x << "," << y;
      }
    }
  }
}

TEST(Grayscale, RejectsBadBuffer) {
  EXPECT_THROW(RawFrame(4, 4, std::vector<std::uint8_t>(10)), Error);
  EXPECT_THROW(RawFrame(0, 4), Error);
}

TEST(HighPass, ConstantImage) {
  for (int v : {0, 30, 60, 200}) {
    const GrayImage out = high_pass(GrayImage(9, 7, static_cast<std::uint8_t>(v)), 5);
    for (auto p : out.data()) EXPECT_EQ(p, std::min(255, v * (5 - 4)));
  }
  const GrayImage k6 = high_pass(GrayImage(5, 5, 100), 6);
  for (auto p : k6.data()) EXPECT_EQ(p, 200);
}

TEST(HighPass, SingleBrightPixel) {
  GrayImage img(7, 7, 0);
  img(3, 3) = 255;
  const GrayImage out = high_pass(img, 5);
  EXPECT_EQ(out(3, 3), 255);  // 5*255 clamps
  EXPECT_EQ(out(2, 3), 0);    // -255 clamps
  EXPECT_EQ(out(4, 3), 0);
  EXPECT_EQ(out(3, 2), 0);
  EXPECT_EQ(out(3, 4), 0);
  EXPECT_EQ(out(0, 0), 0);
}

TEST(HighPass, MatchesConvolutionOracle) {
  std::mt19937 rng(11);
  for (double k : {5.0, 6.0, 8.0, 4.5}) {
    const GrayImage img = rt::random_image(16, 16, rng);
    EXPECT_EQ(high_pass(img, k), rt::convolve3x3(img, rt::high_pass_kernel(k))) << "k=" << k;
  }
}

TEST(HighPass, RejectsSmallK) { EXPECT_THROW(high_pass(GrayImage(3, 3), 4.0), Error); }

TEST(LowPass, ConstantFixedPoint) {
  for (int v : {0, 17, 128, 255}) {
    EXPECT_EQ(low_pass(GrayImage(6, 5, static_cast<std::uint8_t>(v))), GrayImage(6, 5, static_cast<std::uint8_t>(v)));
  }
}

TEST(LowPass, SinglePixelSpreads) {
  GrayImage img(7, 7, 0);
  img(3, 3) = 255;
  const GrayImage out = low_pass(img);
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 7; ++x) {
      const bool near = std::abs(x - 3) <= 1 && std::abs(y - 3) <= 1;
      EXPECT_EQ(out(x, y), near ? 28 : 0) << x << "," << y;
    }
  }
}

TEST(LowPass, MatchesConvolutionOracle) {
  std::mt19937 rng(12);
  for (int i = 0; i < 5; ++i) {
    const GrayImage img = rt::random_image(16, 16, rng);
    EXPECT_EQ(low_pass(img), rt::convolve3x3(img, rt::box_kernel()));
  }
}

TEST(PixelDiff, IdentityAndTotal) {
  std::mt19937 rng(3);
  const GrayImage a = rt::random_image(10, 10, rng);
  const DiffMap same = pixel_diff(a, a, 12);
  EXPECT_EQ(same.changed_fraction, 0.0);
  EXPECT_EQ(same.diff, GrayImage(10, 10, 0));
  EXPECT_DOUBLE_EQ(pixel_diff(GrayImage(4, 4, 0), GrayImage(4, 4, 255), 10).changed_fraction, 1.0);
}

TEST(PixelDiff, CountsExceedances) {
  std::mt19937 rng(5);
  GrayImage a = rt::random_image(10, 10, rng);
  for (auto& p : a.data()) p = static_cast<std::uint8_t>(std::clamp<int>(p, 40, 200));
  GrayImage b = a;
  std::vector<int> idx(100);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  for (int i = 0; i < 7; ++i) b.data()[idx[i]] = static_cast<std::uint8_t>(a.data()[idx[i]] + 30);
  for (int i = 7; i < 20; ++i) b.data()[idx[i]] = static_cast<std::uint8_t>(a.data()[idx[i]] + 12);
  EXPECT_DOUBLE_EQ(pixel_diff(a, b, 12).changed_fraction, 0.07);
}

TEST(PixelDiff, Symmetric) {
  std::mt19937 rng(9);
  for (int i = 0; i < 10; ++i) {
    const GrayImage a = rt::random_image(12, 9, rng), b = rt::random_image(12, 9, rng);
    const DiffMap ab = pixel_diff(a, b), ba = pixel_diff(b, a);
    EXPECT_EQ(ab.diff, ba.diff);
    EXPECT_EQ(ab.changed_fraction, ba.changed_fraction);
  }
}

TEST(PixelDiff, DimensionMismatch) {
  try {
    pixel_diff(GrayImage(3, 3), GrayImage(3, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Brightness, Means) {
  EXPECT_EQ(mean_brightness(GrayImage(5, 5, 0)), 0.0);
  EXPECT_EQ(mean_brightness(GrayImage(5, 5, 200)), 200.0);
  GrayImage half(10, 4, 0);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 10; ++x) half(x, y) = 100;
  EXPECT_EQ(mean_brightness(half), 50.0);
}

TEST(RegionGrids, AspectGivesColumns) {
  EXPECT_EQ(coarse_columns(1.6), 16);
  const DiffMap d = pixel_diff(GrayImage(320, 200), GrayImage(320, 200));
  const RegionGridSet g = region_grids(d, 1.6);
  EXPECT_EQ(g.columns, 16);
  EXPECT_EQ(g.coarse.cols, 16);
  EXPECT_EQ(g.coarse.rows, 10);
  EXPECT_EQ(g.fine.cols, 160);
  EXPECT_EQ(g.fine.rows, 100);
  EXPECT_EQ(g.coarse.count_above(0.0), 0);
  EXPECT_EQ(g.fine.count_above(0.0), 0);
}

TEST(RegionGrids, OneCoarseCellFullyChanged) {
  GrayImage a(320, 200, 0), b(320, 200, 0);
  // Coarse cell (3, 4) is pixels [60,80) x [80,100).
  for (int y = 80; y < 100; ++y)
    for (int x = 60; x < 80; ++x) b(x, y) = 200;
  const RegionGridSet g = region_grids(pixel_diff(a, b), 1.6);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 16; ++c) EXPECT_EQ(g.coarse(c, r), (c == 3 && r == 4) ? 1.0 : 0.0);
  for (int r = 0; r < 100; ++r)
    for (int c = 0; c < 160; ++c) {
      const bool inside = c >= 30 && c < 40 && r >= 40 && r < 50;
      ASSERT_EQ(g.fine(c, r), inside ? 1.0 : 0.0) << c << "," << r;
    }
}

TEST(RegionGrids, CoarseCountIsSumOfFineBlock) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const GrayImage a = rt::random_image(320, 200, rng), b = rt::random_image(320, 200, rng);
    const DiffMap d = pixel_diff(a, b, 100);
    const CellCounts coarse = cell_counts(d, 16, 10);
    const CellCounts fine = cell_counts(d, 160, 100);
    for (int r = 0; r < 10; ++r)
      for (int c = 0; c < 16; ++c) {
        std::uint32_t sum = 0;
        for (int fr = 0; fr < 10; ++fr)
          for (int fc = 0; fc < 10; ++fc) sum += fine.changed[(r * 10 + fr) * 160 + c * 10 + fc];
        ASSERT_EQ(coarse.changed[r * 16 + c], sum);
      }
  }
}

TEST(RegionGrids, RejectsUntileableDiff) {
  EXPECT_THROW(region_grids(pixel_diff(GrayImage(100, 100), GrayImage(100, 100)), 1.6), Error);
  EXPECT_THROW(region_grids(pixel_diff(GrayImage(80, 50), GrayImage(80, 50)), 1.6), Error);
}

TEST(Rectify, AspectSetsWidth) {
  BoardGeometry g{{Point{0, 0}, Point{159, 0}, Point{159, 99}, Point{0, 99}}, 1.6};
  const GrayImage out = rectify(RawFrame(200, 120), g, 100);
  EXPECT_EQ(out.width(), 160);
  EXPECT_EQ(out.height(), 100);
}

TEST(Rectify, AxisAlignedIsCrop) {
  std::mt19937 rng(4);
  RawFrame f(200, 150);
  for (auto& p : f.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  BoardGeometry g{{Point{10, 20}, Point{169, 20}, Point{169, 119}, Point{10, 119}}, 1.6};
  const GrayImage out = rectify(f, g, 100);
  const GrayImage gray = to_grayscale(f);
  ASSERT_EQ(out.width(), 160);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 160; ++x) ASSERT_EQ(out(x, y), gray(x + 10, y + 20)) << x << "," << y;
}

TEST(Rectify, CornersMapToOutputCorners) {
  BoardGeometry g{{Point{40.3, 30.7}, Point{290.2, 45.1}, Point{270.9, 220.4}, Point{25.5, 200.0}}, 1.5};
  const BoardTransform t = BoardTransform::make(g, 120);
  const Point expect[4] = {{0, 0}, {double(t.width - 1), 0}, {double(t.width - 1), 119}, {0, 119}};
  for (int i = 0; i < 4; ++i) {
    const Point p = t.to_output.apply(g.corners[i]);
    EXPECT_NEAR(p.x, expect[i].x, 1e-6);
    EXPECT_NEAR(p.y, expect[i].y, 1e-6);
  }
}

TEST(Rectify, AgreesWithClosedFormSquareToQuad) {
  const std::array<std::array<double, 2>, 4> quad{{{31, 22}, {301, 40}, {280, 230}, {12, 211}}};
  const rt::SquareToQuad oracle(quad);
  BoardGeometry g{{Point{31, 22}, Point{301, 40}, Point{280, 230}, Point{12, 211}}, 1.4};
  const BoardTransform t = BoardTransform::make(g, 100);
  for (double u : {0.0, 0.25, 0.5, 0.9})
    for (double v : {0.0, 0.3, 0.75, 1.0}) {
      const Point p = t.to_source.apply({u * (t.width - 1), v * (t.height - 1)});
      const auto q = oracle(u, v);
      EXPECT_NEAR(p.x, q[0], 1e-6);
      EXPECT_NEAR(p.y, q[1], 1e-6);
    }
}

TEST(Rectify, DegenerateGeometry) {
  const BoardGeometry collinear{{Point{0, 0}, Point{50, 0}, Point{100, 0}, Point{0, 50}}, 1.0};
  const BoardGeometry bowtie{{Point{0, 0}, Point{100, 100}, Point{100, 0}, Point{0, 100}}, 1.0};
  const BoardGeometry reflex{{Point{0, 0}, Point{100, 0}, Point{30, 30}, Point{0, 100}}, 1.0};
  for (const auto& g : {collinear, bowtie, reflex}) {
    try {
      rectify(RawFrame(120, 120), g, 50);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::DegenerateGeometry);
    }
  }
}

TEST(Components, EightConnectivityJoinsDiagonals) {
  Mask m(5, 5);
  m.set(0, 0);
  m.set(1, 1);
  m.set(4, 4);
  const auto eight = connected_components(m);
  ASSERT_EQ(eight.size(), 2u);
  EXPECT_EQ(eight[0].box, (Rect{0, 0, 2, 2}));
  EXPECT_EQ(eight[0].area, 2u);
  EXPECT_EQ(connected_components(m, Connectivity::Four).size(), 3u);
}

TEST(Png, RoundTrip) {
  std::mt19937 rng(8);
  RawFrame f(13, 7);
  for (auto& p : f.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  EXPECT_EQ(decode_png_rgb(encode_png(f)).pixels, f.pixels);
  const GrayImage g = rt::random_image(9, 11, rng);
  EXPECT_EQ(decode_png_gray(encode_png(g)), g);
  EXPECT_THROW(decode_png_rgb({1, 2, 3}), Error);
  EXPECT_THROW(read_png("/nonexistent/frame.png"), Error);
}

TEST(Rectify, CheckerboardLandsAtAnalyticPositions) {
  rt::ProjectedChecker scene{{{{52.0, 31.0}, {281.0, 48.0}, {266.0, 214.0}, {38.0, 199.0}}}, 192, 120};
  BoardGeometry g{{Point{52, 31}, Point{281, 48}, Point{266, 214}, Point{38, 199}}, 1.6};
  const GrayImage out = rectify(scene.render(), g, 120);
  ASSERT_EQ(out.width(), 192);
  const auto squares = scene.dark_square_centroids(out);
  ASSERT_GT(squares.size(), 10u);
  for (const auto& m : squares) {
    EXPECT_LT(std::hypot(m.got_x - m.expect_x, m.got_y - m.expect_y), 0.5)
        << "square at " << m.expect_x << "," << m.expect_y;
  }
}
