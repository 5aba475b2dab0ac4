#include <gtest/gtest.h>

#include <array>

#include "qptv2/color.hpp"
#include "qptv2/imageops.hpp"
#include "test_util.hpp"

using namespace qptv2;
using qptv2::test::max_abs_diff;
using qptv2::test::random_image;

namespace {

Image smooth_image(int h, int w) {
  Image img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img(y, x, 0) = 0.5 + 0.4 * std::sin(0.3 * x);
      img(y, x, 1) = 0.5 + 0.4 * std::cos(0.2 * y);
      img(y, x, 2) = double(x + y) / double(h + w);
    }
  }
  return img;
}

// Standard sector formula; hue in degrees.
std::array<double, 3> hsv_rgb_oracle(double h, double s, double v) {
  h = std::fmod(h, 360.0);
  if (h < 0) h += 360.0;
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c, g = x;
  } else if (hp < 2) {
    r = x, g = c;
  } else if (hp < 3) {
    g = c, b = x;
  } else if (hp < 4) {
    g = x, b = c;
  } else if (hp < 5) {
    r = x, b = c;
  } else {
    r = c, b = x;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

}  // namespace

TEST(Resize, UnitScaleIsIdentity) {
  const Image img = random_image(20, 30, 1);
  EXPECT_EQ(max_abs_diff(apply_resize(img, 1.0), img), 0.0);
}

TEST(Resize, HalfScaleHalvesDimensions) {
  const Image out = apply_resize(random_image(100, 100, 2), 0.5);
  EXPECT_EQ(out.height(), 50);
  EXPECT_EQ(out.width(), 50);
}

TEST(Resize, ConstantStaysConstant) {
  const Image img = Image::constant(37, 23, 0.3);
  for (double s : {0.25, 0.4, 0.77}) {
    const Image out = apply_resize(img, s);
    EXPECT_NEAR(out.min_value(), 0.3, 1e-12);
    EXPECT_NEAR(out.max_value(), 0.3, 1e-12);
  }
}

TEST(Resize, RejectsOutOfRangeScale) {
  EXPECT_THROW(apply_resize(random_image(8, 8, 3), 1.5), ParameterError);
  EXPECT_THROW(apply_resize(random_image(8, 8, 3), 0.1), ParameterError);
}

TEST(Blur, TinySigmaApproachesIdentity) {
  const Image img = random_image(16, 16, 4);
  EXPECT_LE(max_abs_diff(apply_blur(img, 0.01), img), 1e-3);
}

TEST(Blur, ConstantUnchanged) {
  const Image img = Image::constant(12, 9, 0.6);
  EXPECT_NEAR(max_abs_diff(apply_blur(img, 2.0), img), 0.0, 1e-12);
}

TEST(Blur, ImpulseMatchesDirectConvolution) {
  Image img(5, 5);
  for (int c = 0; c < 3; ++c) img(2, 2, c) = 1.0;
  const Image out = apply_blur(img, 1.0);
  const Image oracle = qptv2::test::direct_gaussian_blur(img, 1.0);
  EXPECT_LE(max_abs_diff(out, oracle), 1e-12);
  double norm = 0.0;
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) norm += std::exp(-(dx * dx + dy * dy) / 2.0);
  }
  EXPECT_NEAR(out(2, 2, 0), 1.0 / norm, 1e-12);
}

TEST(Blur, RandomImageMatchesDirectConvolution) {
  const Image img = random_image(11, 14, 5);
  EXPECT_LE(max_abs_diff(apply_blur(img, 1.7), qptv2::test::direct_gaussian_blur(img, 1.7)), 1e-12);
}

TEST(Sharpen, VanishingAmountIsIdentity) {
  const Image img = random_image(10, 10, 6);
  EXPECT_LE(max_abs_diff(apply_sharpen(img, 1e-12), img), 1e-11);
}

TEST(Sharpen, ConstantUnchanged) {
  const Image img = Image::constant(10, 10, 0.4);
  for (double a : {0.3, 1.0, 2.0}) EXPECT_NEAR(max_abs_diff(apply_sharpen(img, a), img), 0.0, 1e-12);
}

TEST(Sharpen, StepEdgeOvershootMatchesFormula) {
  Image img(9, 16);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 9; ++y) {
      for (int x = 0; x < 16; ++x) img(y, x, c) = x < 8 ? 0.3 : 0.7;
    }
  }
  const Image out = apply_sharpen(img, 1.0, 1.0);
  const Image blurred = qptv2::test::direct_gaussian_blur(img, 1.0);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 16; ++x) {
      const double expect = std::clamp(img(y, x, 0) + (img(y, x, 0) - blurred(y, x, 0)), 0.0, 1.0);
      EXPECT_NEAR(out(y, x, 0), expect, 1e-12);
    }
  }
  EXPECT_GT(out(4, 8, 0), 0.7);
  EXPECT_LT(out(4, 7, 0), 0.3);
}

TEST(Noise, ZeroSigmaIsIdentity) {
  const Image img = random_image(8, 8, 7);
  Rng rng(1);
  EXPECT_TRUE(qptv2::test::bit_equal(apply_noise(img, 0.0, rng), img));
}

TEST(Noise, SameSeedSameOutput) {
  const Image img = random_image(8, 8, 8);
  Rng a(42), b(42);
  EXPECT_TRUE(qptv2::test::bit_equal(apply_noise(img, 0.05, a), apply_noise(img, 0.05, b)));
}

TEST(Noise, SampleStdMatchesSigma) {
  const Image img = Image::constant(256, 256, 0.5);
  Rng rng(9);
  const Image out = apply_noise(img, 0.1, rng);
  const auto d = (out.channel(0) - img.channel(0)).eval();
  const double mean = d.mean();
  const double sd = std::sqrt((d - mean).square().sum() / double(d.size() - 1));
  EXPECT_NEAR(sd, 0.1, 0.01);
}

TEST(ColorJitter, IdentityRangesLeaveImage) {
  const Image img = random_image(8, 8, 10);
  Rng rng(3);
  EXPECT_TRUE(qptv2::test::bit_equal(apply_color_jitter(img, JitterRanges::identity(), rng), img));
}

TEST(ColorJitter, BrightnessDoubles) {
  const Image img = Image::constant(4, 4, 0.25);
  JitterRanges r = JitterRanges::identity();
  r.brightness = {2.0, 2.0};
  Rng rng(3);
  EXPECT_NEAR(apply_color_jitter(img, r, rng)(1, 1, 0), 0.5, 1e-15);
}

TEST(ColorJitter, HueShiftMatchesHsvRotation) {
  const Image red = Image::constant_rgb(3, 3, 1.0, 0.0, 0.0);
  for (double turns : {0.05, 0.1, -0.03, 0.5}) {
    JitterRanges r = JitterRanges::identity();
    r.hue = {turns, turns};
    Rng rng(17);
    const Image out = apply_color_jitter(red, r, rng);
    const auto expect = hsv_rgb_oracle(360.0 * turns, 1.0, 1.0);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(out(1, 1, c), expect[c], 1e-6) << "turns " << turns;
  }
}

TEST(Cst, WhiteToGray) {
  const Image out = apply_cst(Image::constant(3, 3, 1.0), ColorSpace::GRAY);
  EXPECT_EQ(out.space(), ColorSpace::GRAY);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(out(0, 0, c), 1.0, 1e-12);
}

TEST(Cst, RedToHsv) {
  const auto hsv = color::rgb_to_hsv<double>({1.0, 0.0, 0.0});
  EXPECT_NEAR(hsv[0], 0.0, 1e-12);
  EXPECT_NEAR(hsv[1], 1.0, 1e-12);
  EXPECT_NEAR(hsv[2], 1.0, 1e-12);
}

TEST(Cst, KnownLabValues) {
  // Reference sRGB (D65) values.
  const auto red = color::rgb_to_lab<double>({1.0, 0.0, 0.0});
  EXPECT_NEAR(red[0], 53.24, 0.05);
  EXPECT_NEAR(red[1], 80.09, 0.1);
  EXPECT_NEAR(red[2], 67.20, 0.1);
  const auto white = color::rgb_to_lab<double>({1.0, 1.0, 1.0});
  EXPECT_NEAR(white[0], 100.0, 1e-3);
  EXPECT_NEAR(white[1], 0.0, 1e-3);
  EXPECT_NEAR(white[2], 0.0, 1e-3);
}

TEST(Cst, RoundTripsOnColorGrid) {
  const int n = 12;
  Image grid(n, n * n);
  for (int r = 0; r < n; ++r) {
    for (int g = 0; g < n; ++g) {
      for (int b = 0; b < n; ++b) {
        grid(r, g * n + b, 0) = r / double(n - 1);
        grid(r, g * n + b, 1) = g / double(n - 1);
        grid(r, g * n + b, 2) = b / double(n - 1);
      }
    }
  }
  for (ColorSpace s : {ColorSpace::LAB, ColorSpace::HSV, ColorSpace::RGB}) {
    const Image there = apply_cst(grid, s);
    EXPECT_GE(there.min_value(), 0.0);
    EXPECT_LE(there.max_value(), 1.0);
    EXPECT_LE(max_abs_diff(color::convert_to_rgb(there), grid), 1e-3) << to_string(s);
  }
}

TEST(RandomCrop, ExactSizeIsIdentity) {
  const Image img = random_image(16, 16, 11);
  Rng rng(5);
  EXPECT_TRUE(qptv2::test::bit_equal(random_crop(img, 16, rng), img));
}

TEST(RandomCrop, SameSeedSameOffset) {
  const Image img = random_image(30, 40, 12);
  Rng a(5), b(5);
  EXPECT_TRUE(qptv2::test::bit_equal(random_crop(img, 16, a), random_crop(img, 16, b)));
}

TEST(RandomCrop, OffsetsUniform) {
  // Each pixel stores its own coordinates, so the crop's top-left reveals the offset.
  ImageF img(340, 500);
  for (int y = 0; y < 340; ++y) {
    for (int x = 0; x < 500; ++x) {
      img(y, x, 0) = float(y);
      img(y, x, 1) = float(x);
    }
  }
  const int ny = 340 - 224 + 1, nx = 500 - 224 + 1;
  std::vector<double> cy(ny, 0.0), cx(nx, 0.0);
  Rng rng(2024);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const ImageF c = random_crop(img, 224, rng);
    ASSERT_EQ(c.height(), 224);
    const int y0 = static_cast<int>(c(0, 0, 0)), x0 = static_cast<int>(c(0, 0, 1));
    ASSERT_TRUE(y0 >= 0 && y0 < ny && x0 >= 0 && x0 < nx);
    cy[y0] += 1;
    cx[x0] += 1;
  }
  auto chi2 = [&](const std::vector<double>& counts) {
    const double e = double(draws) / double(counts.size());
    double s = 0.0;
    for (double o : counts) s += (o - e) * (o - e) / e;
    return s;
  };
  // Mean df, sd sqrt(2 df); allow five standard deviations.
  EXPECT_LT(chi2(cy), (ny - 1) + 5.0 * std::sqrt(2.0 * (ny - 1)));
  EXPECT_LT(chi2(cx), (nx - 1) + 5.0 * std::sqrt(2.0 * (nx - 1)));
}

TEST(RandomCrop, SmallInputsArePadded) {
  Rng rng(1);
  const Image out = random_crop(random_image(10, 20, 13), 32, rng);
  EXPECT_EQ(out.height(), 32);
  EXPECT_EQ(out.width(), 32);
}

TEST(Compose, SingleGrayOnWhite) {
  DegradationPlan plan;
  DegradationStep s = DegradationStep::of(DegradationKind::Cst);
  s.cst_targets = {ColorSpace::GRAY};
  plan.steps = {s};
  plan.crop_size = 8;
  const Image out = compose(Image::constant(12, 12, 1.0), plan);
  EXPECT_EQ(out.height(), 8);
  EXPECT_EQ(out.space(), ColorSpace::GRAY);
  EXPECT_NEAR(out.min_value(), 1.0, 1e-12);
}

TEST(Compose, NearIdentityChainEqualsCrop) {
  const Image img = random_image(24, 24, 14);
  DegradationPlan plan;
  plan.composition = Composition::Sequential;
  DegradationStep blur = DegradationStep::of(DegradationKind::Blur);
  blur.blur_sigma = {0.01, 0.01};
  DegradationStep noise = DegradationStep::of(DegradationKind::GaussianNoise);
  noise.noise_sigma = {0.0, 0.0};
  plan.steps = {blur, noise};
  plan.crop_size = 16;
  plan.seed = 99;
  Rng crop_rng(crop_seed(plan));
  EXPECT_LE(max_abs_diff(compose(img, plan), random_crop(img, 16, crop_rng)), 1e-3);
}

TEST(Compose, AdvancedAllSkippedEqualsPlainCrop) {
  const Image img = random_image(30, 26, 15);
  DegradationPlan plan;
  plan.composition = Composition::Advanced;
  plan.skip_prob = 1.0;
  plan.steps = {DegradationStep::of(DegradationKind::Blur), DegradationStep::of(DegradationKind::Cst),
                DegradationStep::of(DegradationKind::Sharpen)};
  plan.crop_size = 20;
  plan.seed = 5;
  Rng crop_rng(crop_seed(plan));
  EXPECT_TRUE(qptv2::test::bit_equal(compose(img, plan), random_crop(img, 20, crop_rng)));
}

TEST(Compose, FuzzRangeDimsAndDeterminism) {
  const std::array<DegradationKind, 6> kinds{DegradationKind::Resize,        DegradationKind::Blur,
                                             DegradationKind::Sharpen,       DegradationKind::GaussianNoise,
                                             DegradationKind::ColorJitter,   DegradationKind::Cst};
  Rng meta(77);
  for (int trial = 0; trial < 60; ++trial) {
    DegradationPlan plan;
    plan.composition = static_cast<Composition>(trial % 3);
    const int n_steps = plan.composition == Composition::Single ? 1 : 1 + int(meta() % 4);
    for (int i = 0; i < n_steps; ++i) plan.steps.push_back(DegradationStep::of(kinds[meta() % kinds.size()]));
    plan.crop_size = 8 + int(meta() % 20);
    plan.seed = meta();
    const Image img = random_image(6 + int(meta() % 30), 6 + int(meta() % 30), meta());
    const Image a = compose(img, plan);
    const Image b = compose(img, plan);
    EXPECT_TRUE(qptv2::test::bit_equal(a, b));
    EXPECT_EQ(a.height(), plan.crop_size);
    EXPECT_EQ(a.width(), plan.crop_size);
    EXPECT_GE(a.min_value(), 0.0);
    EXPECT_LE(a.max_value(), 1.0);
  }
}

TEST(Compose, InvalidPlansRejected) {
  DegradationPlan plan;
  plan.steps = {DegradationStep::of(DegradationKind::Blur), DegradationStep::of(DegradationKind::Cst)};
  plan.composition = Composition::Single;
  EXPECT_THROW(plan.validate(), ParameterError);
  plan.composition = Composition::Advanced;
  plan.skip_prob = 1.5;
  EXPECT_THROW(plan.validate(), ParameterError);
}

TEST(Spectrum, ConstantImageOnlyDc) {
  const SpectrumProfile p = radial_spectrum(Image::constant(32, 32, 0.7));
  EXPECT_GT(p.bins[0].log_magnitude, std::log(kSpectrumFloor) + 1.0);
  for (std::size_t b = 1; b < p.bins.size(); ++b) {
    EXPECT_NEAR(p.bins[b].log_magnitude, std::log(kSpectrumFloor), 1e-6);
  }
}

TEST(Spectrum, BlurLowersHighFrequencies) {
  const Image img = random_image(64, 64, 16);
  const SpectrumProfile a = radial_spectrum(img);
  const SpectrumProfile b = radial_spectrum(apply_blur(img, 2.0));
  for (std::size_t k = a.bins.size() / 2; k < a.bins.size(); ++k) EXPECT_LT(b.bins[k].log_magnitude, a.bins[k].log_magnitude);
}

TEST(Spectrum, SinusoidPeaksInMatchingAnnulus) {
  const int n = 64;
  for (int f : {3, 8, 13}) {
    Image img(n, n);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        for (int c = 0; c < 3; ++c) img(y, x, c) = 0.5 + 0.4 * std::cos(2.0 * M_PI * f * x / n);
      }
    }
    const SpectrumProfile p = radial_spectrum(img);
    std::size_t best = 1;
    for (std::size_t b = 1; b < p.bins.size(); ++b) {
      if (p.bins[b].log_magnitude > p.bins[best].log_magnitude) best = b;
    }
    EXPECT_LE(p.bins[best].freq_lo, f);
    EXPECT_GT(p.bins[best].freq_hi, f);
  }
}

TEST(ResizeShortEdge, PreservesAspect) {
  const Image out = resize_short_edge(smooth_image(100, 150), 50);
  EXPECT_EQ(out.height(), 50);
  EXPECT_EQ(out.width(), 75);
}
