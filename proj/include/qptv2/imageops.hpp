#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "qptv2/image.hpp"
#include "qptv2/random.hpp"

namespace qptv2 {

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  double sample(Rng& rng) const { return uniform(rng, lo, hi); }
};

// Factor ranges for color jitter. Brightness/contrast/saturation are
// multiplicative (identity = 1); hue is an additive shift in turns (identity = 0).
struct JitterRanges {
  Range brightness{0.8, 1.2};
  Range contrast{0.8, 1.2};
  Range saturation{0.8, 1.2};
  Range hue{-0.05, 0.05};

  static JitterRanges identity() { return {{1, 1}, {1, 1}, {1, 1}, {0, 0}}; }
};

enum class DegradationKind { Resize, Blur, Sharpen, GaussianNoise, ColorJitter, Cst };

std::string_view to_string(DegradationKind kind);
DegradationKind parse_degradation_kind(std::string_view name);

// One step of a degradation chain together with the ranges its parameters are
// drawn from. Only the fields relevant to `kind` are consulted.
struct DegradationStep {
  DegradationKind kind = DegradationKind::Cst;
  Range resize_scale{0.5, 1.0};
  Range blur_sigma{0.1, 2.0};
  Range sharpen_amount{0.2, 1.0};
  double sharpen_sigma = 1.0;
  Range noise_sigma{0.01, 0.1};
  JitterRanges jitter;
  std::vector<ColorSpace> cst_targets{ColorSpace::RGB, ColorSpace::LAB, ColorSpace::HSV, ColorSpace::GRAY};

  static DegradationStep of(DegradationKind kind) {
    DegradationStep s;
    s.kind = kind;
    return s;
  }
};

enum class Composition { Single, Sequential, Advanced };

std::string_view to_string(Composition c);
Composition parse_composition(std::string_view name);

struct DegradationPlan {
  std::vector<DegradationStep> steps;
  Composition composition = Composition::Single;
  double skip_prob = 0.3;  // advanced only
  int max_order = 2;       // advanced only
  int crop_size = 224;
  std::uint64_t seed = 0;

  // Throws ParameterError when the plan violates its invariants.
  void validate() const;
};

struct SpectrumBin {
  double freq_lo = 0.0;  // cycles per image, inclusive
  double freq_hi = 0.0;  // exclusive
  double log_magnitude = 0.0;
};

struct SpectrumProfile {
  std::vector<SpectrumBin> bins;
};

// Floor of the log-magnitude scale; bins with no energy sit here.
inline constexpr double kSpectrumFloor = 1e-8;

template <typename Scalar>
BasicImage<Scalar> apply_resize(const BasicImage<Scalar>& img, double scale);

template <typename Scalar>
BasicImage<Scalar> apply_blur(const BasicImage<Scalar>& img, double sigma);

template <typename Scalar>
BasicImage<Scalar> apply_sharpen(const BasicImage<Scalar>& img, double amount, double sigma = 1.0);

template <typename Scalar>
BasicImage<Scalar> apply_noise(const BasicImage<Scalar>& img, double sigma, Rng& rng);

template <typename Scalar>
BasicImage<Scalar> apply_color_jitter(const BasicImage<Scalar>& img, const JitterRanges& ranges, Rng& rng);

template <typename Scalar>
BasicImage<Scalar> apply_cst(const BasicImage<Scalar>& img, ColorSpace target);

// Reflect-pads when the image is smaller than `size` along either axis.
template <typename Scalar>
BasicImage<Scalar> random_crop(const BasicImage<Scalar>& img, int size, Rng& rng);

template <typename Scalar>
BasicImage<Scalar> reflect_pad_to(const BasicImage<Scalar>& img, int min_height, int min_width);

// Resizes to an exact output shape with bilinear sampling (half-pixel centers).
template <typename Scalar>
BasicImage<Scalar> resize_to(const BasicImage<Scalar>& img, int height, int width);

// Scales so the shorter edge equals `short_side`, preserving aspect ratio.
template <typename Scalar>
BasicImage<Scalar> resize_short_edge(const BasicImage<Scalar>& img, int short_side);

// Applies the plan's steps according to its composition mode, then the final
// random crop. Steps and crop draw from independent streams derived from
// plan.seed, so skipping every step leaves the crop offset unchanged.
template <typename Scalar>
BasicImage<Scalar> compose(const BasicImage<Scalar>& img, const DegradationPlan& plan);

// Seed of the crop stream used by compose().
std::uint64_t crop_seed(const DegradationPlan& plan);

template <typename Scalar>
SpectrumProfile radial_spectrum(const BasicImage<Scalar>& img);

// Normalized 1-D Gaussian taps of radius max(1, ceil(3 sigma)).
std::vector<double> gaussian_kernel(double sigma);

// Reflect-101 index into [0, n).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace qptv2
