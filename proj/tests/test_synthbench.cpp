#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "qptv2/metrics.hpp"
#include "qptv2/synthbench.hpp"
#include "test_util.hpp"

using namespace qptv2;
using qptv2::test::bit_equal;

namespace {

// Mean squared response of the 4-neighbour Laplacian on the channel mean.
double laplacian_energy(const Image& im) {
  double s = 0.0;
  int n = 0;
  for (int y = 1; y + 1 < im.height(); ++y) {
    for (int x = 1; x + 1 < im.width(); ++x) {
      double l = 0.0;
      for (int c = 0; c < 3; ++c) {
        l += 4 * im(y, x, c) - im(y - 1, x, c) - im(y + 1, x, c) - im(y, x - 1, c) - im(y, x + 1, c);
      }
      l /= 3.0;
      s += l * l;
      ++n;
    }
  }
  return s / n;
}

double high_band(const SpectrumProfile& p) {
  const double mid = p.bins.back().freq_hi / 2.0;
  double s = 0.0;
  int n = 0;
  for (const auto& b : p.bins) {
    if (b.freq_lo >= mid) {
      s += b.log_magnitude;
      ++n;
    }
  }
  return s / n;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST(GenTexture, Deterministic) {
  SynthSpec s;
  s.seed = 4;
  EXPECT_TRUE(bit_equal(gen_texture(s, 3), gen_texture(s, 3)));
  EXPECT_FALSE(bit_equal(gen_texture(s, 3), gen_texture(s, 4)));
}

TEST(GenTexture, ZeroDetailIsPlainGradient) {
  SynthSpec s;
  s.detail_level = 0.0;
  const SynthSample smp = gen_texture_sample(s, 0);
  EXPECT_EQ(smp.shapes, 0);
  EXPECT_EQ(smp.foreground.cast<int>().sum(), 0);
  // A linear gradient has zero second differences away from clipping.
  EXPECT_LT(laplacian_energy(smp.image), 1e-20);
}

TEST(GenTexture, MoreDetailMoreShapes) {
  SynthSpec s;
  int prev = -1;
  for (double d : {0.0, 0.1, 0.3, 0.5, 0.8, 1.0}) {
    s.detail_level = d;
    EXPECT_GT(shape_count(s), prev);
    prev = shape_count(s);
    EXPECT_EQ(gen_texture_sample(s, 2).shapes, shape_count(s));
  }
}

TEST(GenTexture, HighBandEnergyGrowsWithDetail) {
  SynthSpec s;
  s.size = 64;
  double prev = -1e300;
  for (double d : {0.0, 0.25, 0.5, 1.0}) {
    s.detail_level = d;
    double mean = 0.0;
    for (int i = 0; i < 50; ++i) mean += high_band(radial_spectrum(gen_texture(s, std::uint64_t(i))));
    mean /= 50.0;
    EXPECT_GT(mean, prev) << "detail " << d;
    prev = mean;
  }
}

TEST(GradeQuality, SeverityEndpoints) {
  SynthSpec s;
  const Image img = gen_texture(s, 1);
  const GradedImage g0 = grade_quality(img, 0.0, s, 5);
  EXPECT_TRUE(bit_equal(g0.image, img));
  EXPECT_DOUBLE_EQ(g0.mos, mos_map(0.0));
  EXPECT_DOUBLE_EQ(grade_quality(img, 1.0, s, 5).mos, mos_map(1.0));
  EXPECT_DOUBLE_EQ(mos_map(1.0), 1.0);
  EXPECT_DOUBLE_EQ(mos_map(0.0), 5.0);
  EXPECT_THROW(grade_quality(img, 1.5, s, 5), ParameterError);
}

TEST(GradeQuality, MosStrictlyDecreasing) {
  SynthSpec s;
  const Image img = gen_texture(s, 1);
  double prev = 1e9;
  for (double sev : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const double m = grade_quality(img, sev, s, 9).mos;
    EXPECT_LT(m, prev);
    prev = m;
  }
}

TEST(GradeQuality, SeverityRecoverableFromHighFrequencyEnergy) {
  SynthSpec s;
  std::vector<double> energy, sev;
  for (int i = 0; i < 200; ++i) {
    const double v = sample_severity(s, std::uint64_t(i));
    energy.push_back(laplacian_energy(grade_quality(gen_texture(s, std::uint64_t(i)), v, s, 7 * i + 1).image));
    sev.push_back(v);
  }
  EXPECT_GE(std::fabs(srcc(energy, sev)), 0.9);
}

TEST(SampleSeverity, WithinRange) {
  SynthSpec s;
  s.severity_range = {0.2, 0.6};
  for (int i = 0; i < 100; ++i) {
    const double v = sample_severity(s, std::uint64_t(i));
    EXPECT_GE(v, 0.2);
    EXPECT_LE(v, 0.6);
  }
}

TEST(BuildManifest, RecordsAndDeterminism) {
  SynthSpec s;
  s.n_images = 10;
  s.size = 32;
  s.seed = 3;
  const auto a = qptv2::test::scratch_dir("synth_a"), b = qptv2::test::scratch_dir("synth_b");
  const auto ma = build_manifest(s, a), mb = build_manifest(s, b);
  const auto recs = read_manifest(ma);
  ASSERT_EQ(recs.size(), 10u);
  for (const auto& r : recs) {
    EXPECT_TRUE(std::filesystem::exists(r.path));
    ASSERT_TRUE(r.fg_mask_path.has_value());
    EXPECT_TRUE(std::filesystem::exists(*r.fg_mask_path));
    ASSERT_TRUE(r.mos.has_value());
    ASSERT_TRUE(r.severity.has_value());
    EXPECT_EQ(r.width, 32);
    EXPECT_EQ(r.object_count, shape_count(s));
    EXPECT_GE(*r.fc, 0.0);
  }
  EXPECT_EQ(slurp(ma), slurp(mb));
  EXPECT_EQ(slurp(recs[3].path), slurp(b / recs[3].path.lexically_relative(a)));
}

TEST(GenVideo, FramesAndDrift) {
  SynthSpec s;
  s.size = 32;
  const auto v = gen_video(s, 1, 6, 0.0);
  ASSERT_EQ(v.size(), 6u);
  EXPECT_EQ(v[0].height(), 32);
  EXPECT_FALSE(bit_equal(v[0], v[1]));
  // Drift of one pixel per frame along the diagonal.
  EXPECT_DOUBLE_EQ(v[1](0, 0, 0), v[0](1, 1, 0));
}

TEST(SynthSpec, Validation) {
  SynthSpec s;
  s.detail_level = 1.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = SynthSpec{};
  s.severity_range = {0.8, 0.2};
  EXPECT_THROW(s.validate(), ConfigError);
}
