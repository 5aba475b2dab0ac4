#include "qptv2/imageops.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numeric>

#include "qptv2/color.hpp"

namespace qptv2 {

std::string_view to_string(DegradationKind kind) {
  switch (kind) {
    case DegradationKind::Resize: return "resize";
    case DegradationKind::Blur: return "blur";
    case DegradationKind::Sharpen: return "sharpen";
    case DegradationKind::GaussianNoise: return "gaussian_noise";
    case DegradationKind::ColorJitter: return "color_jitter";
    case DegradationKind::Cst: return "cst";
  }
  return "?";
}

DegradationKind parse_degradation_kind(std::string_view name) {
  if (name == "resize") return DegradationKind::Resize;
  if (name == "blur") return DegradationKind::Blur;
  if (name == "sharpen") return DegradationKind::Sharpen;
  if (name == "gaussian_noise" || name == "noise") return DegradationKind::GaussianNoise;
  if (name == "color_jitter" || name == "jitter") return DegradationKind::ColorJitter;
  if (name == "cst") return DegradationKind::Cst;
  throw ParameterError("unknown degradation kind '" + std::string(name) + "'");
}

std::string_view to_string(Composition c) {
  switch (c) {
    case Composition::Single: return "single";
    case Composition::Sequential: return "sequential";
    case Composition::Advanced: return "advanced";
  }
  return "?";
}

Composition parse_composition(std::string_view name) {
  if (name == "single") return Composition::Single;
  if (name == "sequential") return Composition::Sequential;
  if (name == "advanced") return Composition::Advanced;
  throw ParameterError("unknown composition '" + std::string(name) + "'");
}

void DegradationPlan::validate() const {
  if (crop_size <= 0) throw ParameterError("crop_size must be positive");
  if (composition == Composition::Single && steps.size() != 1) {
    throw ParameterError("single composition needs exactly one step, got " + std::to_string(steps.size()));
  }
  if (composition == Composition::Advanced) {
    if (!(skip_prob >= 0.0 && skip_prob <= 1.0)) throw ParameterError("skip_prob must lie in [0, 1]");
    if (max_order < 1) throw ParameterError("max_order must be >= 1");
  }
  for (const auto& s : steps) {
    if (s.kind == DegradationKind::Cst && s.cst_targets.empty()) {
      throw ParameterError("cst step needs at least one target space");
    }
  }
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& v : k) v /= sum;
  return k;
}

namespace {

template <typename Scalar>
Plane<Scalar> convolve_separable(const Plane<Scalar>& src, const std::vector<double>& k) {
  const int h = static_cast<int>(src.rows()), w = static_cast<int>(src.cols());
  const int r = static_cast<int>(k.size() / 2);
  Plane<double> tmp(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += k[t + r] * double(src(y, reflect_index(x + t, w)));
      tmp(y, x) = acc;
    }
  }
  Plane<Scalar> out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += k[t + r] * tmp(reflect_index(y + t, h), x);
      out(y, x) = static_cast<Scalar>(acc);
    }
  }
  return out;
}

template <typename Scalar>
Plane<Scalar> resize_plane(const Plane<Scalar>& src, int oh, int ow) {
  const int ih = static_cast<int>(src.rows()), iw = static_cast<int>(src.cols());
  Plane<Scalar> out(oh, ow);
  const double sy = double(ih) / oh, sx = double(iw) / ow;
  for (int y = 0; y < oh; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(ih - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, ih - 1);
    const double wy = fy - y0;
    for (int x = 0; x < ow; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(iw - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, iw - 1);
      const double wx = fx - x0;
      // Skip zero-weight taps so an identity mapping reproduces the source exactly.
      double v = double(src(y0, x0));
      if (wx > 0.0) v = (1.0 - wx) * v + wx * double(src(y0, x1));
      if (wy > 0.0) {
        double below = double(src(y1, x0));
        if (wx > 0.0) below = (1.0 - wx) * below + wx * double(src(y1, x1));
        v = (1.0 - wy) * v + wy * below;
      }
      out(y, x) = static_cast<Scalar>(v);
    }
  }
  return out;
}

template <typename Scalar>
Plane<Scalar> luma_plane(const BasicImage<Scalar>& img) {
  return Scalar(0.299) * img.channel(0) + Scalar(0.587) * img.channel(1) + Scalar(0.114) * img.channel(2);
}

template <typename Scalar>
void adjust_brightness(BasicImage<Scalar>& img, double f) {
  for (int c = 0; c < 3; ++c) img.channel(c) *= Scalar(f);
  img.clip01();
}

template <typename Scalar>
void adjust_contrast(BasicImage<Scalar>& img, double f) {
  const Scalar mean = luma_plane(img).mean();
  for (int c = 0; c < 3; ++c) img.channel(c) = mean + Scalar(f) * (img.channel(c) - mean);
  img.clip01();
}

template <typename Scalar>
void adjust_saturation(BasicImage<Scalar>& img, double f) {
  const Plane<Scalar> gray = luma_plane(img);
  for (int c = 0; c < 3; ++c) img.channel(c) = gray + Scalar(f) * (img.channel(c) - gray);
  img.clip01();
}

template <typename Scalar>
void adjust_hue(BasicImage<Scalar>& img, double turns) {
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      color::Vec3<Scalar> hsv = color::rgb_to_hsv<Scalar>({img(y, x, 0), img(y, x, 1), img(y, x, 2)});
      hsv[0] += Scalar(360.0 * turns);
      const color::Vec3<Scalar> rgb = color::hsv_to_rgb<Scalar>(hsv);
      for (int c = 0; c < 3; ++c) img(y, x, c) = std::clamp(rgb[c], Scalar(0), Scalar(1));
    }
  }
}

void require_rgb(ColorSpace s, const char* op) {
  if (s != ColorSpace::RGB) throw ParameterError(std::string(op) + " expects an RGB image");
}

}  // namespace

template <typename Scalar>
BasicImage<Scalar> resize_to(const BasicImage<Scalar>& img, int height, int width) {
  if (height < 1 || width < 1) throw ParameterError("resize target must be at least 1x1");
  BasicImage<Scalar> out(height, width, img.space());
  for (int c = 0; c < 3; ++c) out.channel(c) = resize_plane(img.channel(c), height, width);
  return out;
}

template <typename Scalar>
BasicImage<Scalar> apply_resize(const BasicImage<Scalar>& img, double scale) {
  require_rgb(img.space(), "apply_resize");
  if (!(scale >= 0.25 && scale <= 1.0)) {
    throw ParameterError("resize scale must lie in [0.25, 1.0], got " + std::to_string(scale));
  }
  const int oh = std::max(1, static_cast<int>(std::lround(scale * img.height())));
  const int ow = std::max(1, static_cast<int>(std::lround(scale * img.width())));
  BasicImage<Scalar> out = resize_to(img, oh, ow);
  out.clip01();
  return out;
}

template <typename Scalar>
BasicImage<Scalar> resize_short_edge(const BasicImage<Scalar>& img, int short_side) {
  if (short_side < 1) throw ParameterError("short_side must be positive");
  const int s = std::min(img.height(), img.width());
  if (s == short_side) return img;
  const double f = double(short_side) / s;
  const int oh = img.height() == s ? short_side : std::max(1, static_cast<int>(std::lround(img.height() * f)));
  const int ow = img.width() == s ? short_side : std::max(1, static_cast<int>(std::lround(img.width() * f)));
  return resize_to(img, oh, ow);
}

template <typename Scalar>
BasicImage<Scalar> apply_blur(const BasicImage<Scalar>& img, double sigma) {
  if (!(sigma > 0.0 && sigma <= 5.0)) {
    throw ParameterError("blur sigma must lie in (0, 5], got " + std::to_string(sigma));
  }
  const std::vector<double> k = gaussian_kernel(sigma);
  BasicImage<Scalar> out(img.height(), img.width(), img.space());
  for (int c = 0; c < 3; ++c) out.channel(c) = convolve_separable(img.channel(c), k);
  out.clip01();
  return out;
}

template <typename Scalar>
BasicImage<Scalar> apply_sharpen(const BasicImage<Scalar>& img, double amount, double sigma) {
  if (!(amount > 0.0 && amount <= 2.0)) {
    throw ParameterError("sharpen amount must lie in (0, 2], got " + std::to_string(amount));
  }
  const BasicImage<Scalar> blurred = apply_blur(img, sigma);
  BasicImage<Scalar> out(img.height(), img.width(), img.space());
  for (int c = 0; c < 3; ++c) {
    out.channel(c) = img.channel(c) + Scalar(amount) * (img.channel(c) - blurred.channel(c));
  }
  out.clip01();
  return out;
}

template <typename Scalar>
BasicImage<Scalar> apply_noise(const BasicImage<Scalar>& img, double sigma, Rng& rng) {
  if (!(sigma >= 0.0 && sigma <= 0.2)) {
    throw ParameterError("noise sigma must lie in [0, 0.2], got " + std::to_string(sigma));
  }
  if (sigma == 0.0) return img;
  std::normal_distribution<double> normal(0.0, sigma);
  BasicImage<Scalar> out = img;
  for (int c = 0; c < 3; ++c) {
    auto& p = out.channel(c);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = static_cast<Scalar>(p.data()[i] + normal(rng));
  }
  out.clip01();
  return out;
}

template <typename Scalar>
BasicImage<Scalar> apply_color_jitter(const BasicImage<Scalar>& img, const JitterRanges& ranges, Rng& rng) {
  require_rgb(img.space(), "apply_color_jitter");
  const std::array<double, 4> factors{ranges.brightness.sample(rng), ranges.contrast.sample(rng),
                                      ranges.saturation.sample(rng), ranges.hue.sample(rng)};
  std::array<int, 4> order{0, 1, 2, 3};
  std::shuffle(order.begin(), order.end(), rng);

  BasicImage<Scalar> out = img;
  for (int op : order) {
    const double f = factors[op];
    switch (op) {
      case 0:
        if (f != 1.0) adjust_brightness(out, f);
        break;
      case 1:
        if (f != 1.0) adjust_contrast(out, f);
        break;
      case 2:
        if (f != 1.0) adjust_saturation(out, f);
        break;
      default:
        if (f != 0.0) adjust_hue(out, f);
        break;
    }
  }
  return out;
}

template <typename Scalar>
BasicImage<Scalar> apply_cst(const BasicImage<Scalar>& img, ColorSpace target) {
  require_rgb(img.space(), "apply_cst");
  return color::convert_from_rgb(img, target);
}

template <typename Scalar>
BasicImage<Scalar> reflect_pad_to(const BasicImage<Scalar>& img, int min_height, int min_width) {
  const int h = img.height(), w = img.width();
  const int oh = std::max(h, min_height), ow = std::max(w, min_width);
  if (oh == h && ow == w) return img;
  const int top = (oh - h) / 2, left = (ow - w) / 2;
  BasicImage<Scalar> out(oh, ow, img.space());
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < oh; ++y) {
      const int sy = reflect_index(y - top, h);
      for (int x = 0; x < ow; ++x) out(y, x, c) = img(sy, reflect_index(x - left, w), c);
    }
  }
  return out;
}

template <typename Scalar>
BasicImage<Scalar> random_crop(const BasicImage<Scalar>& img, int size, Rng& rng) {
  if (size <= 0) throw ParameterError("crop size must be positive, got " + std::to_string(size));
  const BasicImage<Scalar> padded = reflect_pad_to(img, size, size);
  const int y0 = std::uniform_int_distribution<int>(0, padded.height() - size)(rng);
  const int x0 = std::uniform_int_distribution<int>(0, padded.width() - size)(rng);
  return padded.crop(y0, x0, size, size);
}

namespace {

bool needs_rgb(DegradationKind k) {
  return k == DegradationKind::Resize || k == DegradationKind::ColorJitter || k == DegradationKind::Cst;
}

template <typename Scalar>
BasicImage<Scalar> apply_step_rgb(const BasicImage<Scalar>& img, const DegradationStep& step, Rng& rng) {
  switch (step.kind) {
    case DegradationKind::Resize: return apply_resize(img, step.resize_scale.sample(rng));
    case DegradationKind::Blur: return apply_blur(img, step.blur_sigma.sample(rng));
    case DegradationKind::Sharpen: return apply_sharpen(img, step.sharpen_amount.sample(rng), step.sharpen_sigma);
    case DegradationKind::GaussianNoise: {
      const double sigma = step.noise_sigma.sample(rng);
      return apply_noise(img, sigma, rng);
    }
    case DegradationKind::ColorJitter: return apply_color_jitter(img, step.jitter, rng);
    case DegradationKind::Cst: {
      const auto n = static_cast<int>(step.cst_targets.size());
      const int pick = std::uniform_int_distribution<int>(0, n - 1)(rng);
      return apply_cst(img, step.cst_targets[pick]);
    }
  }
  return img;
}

// Steps that are defined on RGB input run in RGB and are mapped back into the
// current space afterwards; a CST step replaces the current space.
template <typename Scalar>
BasicImage<Scalar> apply_step(const BasicImage<Scalar>& img, const DegradationStep& step, Rng& rng) {
  if (img.space() == ColorSpace::RGB || !needs_rgb(step.kind)) return apply_step_rgb(img, step, rng);
  const ColorSpace space = img.space();
  BasicImage<Scalar> out = apply_step_rgb(color::convert_to_rgb(img), step, rng);
  if (step.kind == DegradationKind::Cst) return out;
  return color::convert_from_rgb(out, space);
}

constexpr std::uint64_t kStepStream = 1;
constexpr std::uint64_t kCropStream = 2;

}  // namespace

std::uint64_t crop_seed(const DegradationPlan& plan) { return derive_seed(plan.seed, {kCropStream}); }

template <typename Scalar>
BasicImage<Scalar> compose(const BasicImage<Scalar>& img, const DegradationPlan& plan) {
  plan.validate();
  Rng rng(derive_seed(plan.seed, {kStepStream}));
  BasicImage<Scalar> cur = img;
  switch (plan.composition) {
    case Composition::Single:
    case Composition::Sequential:
      for (const auto& step : plan.steps) cur = apply_step(cur, step, rng);
      break;
    case Composition::Advanced: {
      const int order = std::uniform_int_distribution<int>(1, plan.max_order)(rng);
      std::bernoulli_distribution skip(plan.skip_prob);
      std::vector<std::size_t> idx(plan.steps.size());
      for (int round = 0; round < order; ++round) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i : idx) {
          if (skip(rng)) continue;
          cur = apply_step(cur, plan.steps[i], rng);
        }
      }
      break;
    }
  }
  Rng crop_rng(crop_seed(plan));
  return random_crop(cur, plan.crop_size, crop_rng);
}

template <typename Scalar>
SpectrumProfile radial_spectrum(const BasicImage<Scalar>& img) {
  if (img.height() != img.width()) {
    throw ParameterError("radial_spectrum expects a square image, got " + std::to_string(img.height()) + "x" +
                         std::to_string(img.width()));
  }
  const int n = img.height();
  const Plane<Scalar> gray = img.channel_mean();

  Eigen::FFT<double> fft;
  std::vector<std::vector<std::complex<double>>> rows(n);
  std::vector<double> line(n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) line[x] = double(gray(y, x));
    fft.fwd(rows[y], line);
  }
  Plane<double> magnitude(n, n);
  std::vector<std::complex<double>> col(n), col_out;
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) col[y] = rows[y][x];
    fft.fwd(col_out, col);
    for (int y = 0; y < n; ++y) magnitude(y, x) = std::abs(col_out[y]) / (double(n) * n);
  }

  const double nyquist = n / 2.0;
  const int n_bins = std::max(8, n / 2);
  const double width = nyquist / n_bins;
  std::vector<double> sum(n_bins, 0.0);
  std::vector<int> count(n_bins, 0);
  for (int y = 0; y < n; ++y) {
    const int fy = y <= n / 2 ? y : y - n;
    for (int x = 0; x < n; ++x) {
      const int fx = x <= n / 2 ? x : x - n;
      const double r = std::sqrt(double(fx * fx + fy * fy));
      if (r >= nyquist) continue;
      const int b = std::min(n_bins - 1, static_cast<int>(r / width));
      sum[b] += std::log(magnitude(y, x) + kSpectrumFloor);
      ++count[b];
    }
  }
  SpectrumProfile profile;
  profile.bins.reserve(n_bins);
  for (int b = 0; b < n_bins; ++b) {
    const double v = count[b] > 0 ? sum[b] / count[b] : std::log(kSpectrumFloor);
    profile.bins.push_back({b * width, (b + 1) * width, v});
  }
  return profile;
}

#define QPTV2_INSTANTIATE_IMAGEOPS(T)                                                            \
  template BasicImage<T> resize_to<T>(const BasicImage<T>&, int, int);                           \
  template BasicImage<T> resize_short_edge<T>(const BasicImage<T>&, int);                        \
  template BasicImage<T> apply_resize<T>(const BasicImage<T>&, double);                          \
  template BasicImage<T> apply_blur<T>(const BasicImage<T>&, double);                            \
  template BasicImage<T> apply_sharpen<T>(const BasicImage<T>&, double, double);                 \
  template BasicImage<T> apply_noise<T>(const BasicImage<T>&, double, Rng&);                     \
  template BasicImage<T> apply_color_jitter<T>(const BasicImage<T>&, const JitterRanges&, Rng&); \
  template BasicImage<T> apply_cst<T>(const BasicImage<T>&, ColorSpace);                         \
  template BasicImage<T> reflect_pad_to<T>(const BasicImage<T>&, int, int);                      \
  template BasicImage<T> random_crop<T>(const BasicImage<T>&, int, Rng&);                        \
  template BasicImage<T> compose<T>(const BasicImage<T>&, const DegradationPlan&);               \
  template SpectrumProfile radial_spectrum<T>(const BasicImage<T>&);

QPTV2_INSTANTIATE_IMAGEOPS(float)
QPTV2_INSTANTIATE_IMAGEOPS(double)

#undef QPTV2_INSTANTIATE_IMAGEOPS

}  // namespace qptv2
