#include "qptv2/color.hpp"

#include <Eigen/LU>

#include <cmath>

namespace qptv2 {

std::string_view to_string(ColorSpace space) {
  switch (space) {
    case ColorSpace::RGB: return "rgb";
    case ColorSpace::LAB: return "lab";
    case ColorSpace::HSV: return "hsv";
    case ColorSpace::GRAY: return "gray";
  }
  return "?";
}

ColorSpace parse_color_space(std::string_view name) {
  if (name == "rgb" || name == "RGB") return ColorSpace::RGB;
  if (name == "lab" || name == "LAB") return ColorSpace::LAB;
  if (name == "hsv" || name == "HSV") return ColorSpace::HSV;
  if (name == "gray" || name == "GRAY" || name == "grey") return ColorSpace::GRAY;
  throw ParameterError("unknown color space '" + std::string(name) + "'");
}

namespace color {
namespace {

// sRGB primaries, D65 white.
const Eigen::Matrix3d& rgb_to_xyz_matrix() {
  static const Eigen::Matrix3d m = (Eigen::Matrix3d() << 0.4124564, 0.3575761, 0.1804375,  //
                                    0.2126729, 0.7151522, 0.0721750,                      //
                                    0.0193339, 0.1191920, 0.9503041)
                                       .finished();
  return m;
}

const Eigen::Matrix3d& xyz_to_rgb_matrix() {
  static const Eigen::Matrix3d m = rgb_to_xyz_matrix().inverse();
  return m;
}

const Eigen::Vector3d kWhiteD65(0.95047, 1.0, 1.08883);
constexpr double kDelta = 6.0 / 29.0;

double srgb_to_linear(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }

double linear_to_srgb(double c) {
  c = std::clamp(c, 0.0, 1.0);
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_finv(double t) { return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0); }

}  // namespace

template <typename Scalar>
Vec3<Scalar> rgb_to_hsv(const Vec3<Scalar>& rgb) {
  const Scalar r = rgb[0], g = rgb[1], b = rgb[2];
  const Scalar mx = std::max({r, g, b});
  const Scalar mn = std::min({r, g, b});
  const Scalar d = mx - mn;
  Scalar h = 0;
  if (d > Scalar(0)) {
    if (mx == r) {
      h = Scalar(60) * std::fmod((g - b) / d, Scalar(6));
    } else if (mx == g) {
      h = Scalar(60) * ((b - r) / d + Scalar(2));
    } else {
      h = Scalar(60) * ((r - g) / d + Scalar(4));
    }
    if (h < Scalar(0)) h += Scalar(360);
    if (h >= Scalar(360)) h -= Scalar(360);
  }
  const Scalar s = mx > Scalar(0) ? d / mx : Scalar(0);
  return {h, s, mx};
}

template <typename Scalar>
Vec3<Scalar> hsv_to_rgb(const Vec3<Scalar>& hsv) {
  Scalar h = std::fmod(hsv[0], Scalar(360));
  if (h < Scalar(0)) h += Scalar(360);
  const Scalar s = hsv[1], v = hsv[2];
  const Scalar c = v * s;
  const Scalar hp = h / Scalar(60);
  const Scalar x = c * (Scalar(1) - std::abs(std::fmod(hp, Scalar(2)) - Scalar(1)));
  Vec3<Scalar> rgb;
  switch (static_cast<int>(hp) % 6) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  return rgb.array() + (v - c);
}

template <typename Scalar>
Vec3<Scalar> rgb_to_lab(const Vec3<Scalar>& rgb) {
  const Eigen::Vector3d lin(srgb_to_linear(rgb[0]), srgb_to_linear(rgb[1]), srgb_to_linear(rgb[2]));
  const Eigen::Vector3d xyz = (rgb_to_xyz_matrix() * lin).cwiseQuotient(kWhiteD65);
  const double fx = lab_f(xyz[0]), fy = lab_f(xyz[1]), fz = lab_f(xyz[2]);
  return Vec3<Scalar>(Scalar(116.0 * fy - 16.0), Scalar(500.0 * (fx - fy)), Scalar(200.0 * (fy - fz)));
}

template <typename Scalar>
Vec3<Scalar> lab_to_rgb(const Vec3<Scalar>& lab) {
  const double fy = (double(lab[0]) + 16.0) / 116.0;
  const double fx = fy + double(lab[1]) / 500.0;
  const double fz = fy - double(lab[2]) / 200.0;
  const Eigen::Vector3d xyz = Eigen::Vector3d(lab_finv(fx), lab_finv(fy), lab_finv(fz)).cwiseProduct(kWhiteD65);
  const Eigen::Vector3d lin = xyz_to_rgb_matrix() * xyz;
  return Vec3<Scalar>(Scalar(linear_to_srgb(lin[0])), Scalar(linear_to_srgb(lin[1])),
                      Scalar(linear_to_srgb(lin[2])));
}

template <typename Scalar>
Scalar luminance(const Vec3<Scalar>& rgb) {
  return Scalar(0.299) * rgb[0] + Scalar(0.587) * rgb[1] + Scalar(0.114) * rgb[2];
}

template <typename Scalar>
Vec3<Scalar> normalize_lab(const Vec3<Scalar>& lab) {
  return {lab[0] / Scalar(100), (lab[1] + Scalar(128)) / Scalar(255), (lab[2] + Scalar(128)) / Scalar(255)};
}

template <typename Scalar>
Vec3<Scalar> denormalize_lab(const Vec3<Scalar>& v) {
  return {v[0] * Scalar(100), v[1] * Scalar(255) - Scalar(128), v[2] * Scalar(255) - Scalar(128)};
}

template <typename Scalar>
Vec3<Scalar> normalize_hsv(const Vec3<Scalar>& hsv) {
  return {hsv[0] / Scalar(360), hsv[1], hsv[2]};
}

template <typename Scalar>
Vec3<Scalar> denormalize_hsv(const Vec3<Scalar>& v) {
  return {v[0] * Scalar(360), v[1], v[2]};
}

namespace {

template <typename Scalar, typename Fn>
BasicImage<Scalar> map_pixels(const BasicImage<Scalar>& img, ColorSpace out_space, Fn&& fn) {
  BasicImage<Scalar> out(img.height(), img.width(), out_space);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Vec3<Scalar> v = fn(Vec3<Scalar>(img(y, x, 0), img(y, x, 1), img(y, x, 2)));
      for (int c = 0; c < 3; ++c) out(y, x, c) = std::clamp(v[c], Scalar(0), Scalar(1));
    }
  }
  return out;
}

}  // namespace

template <typename Scalar>
BasicImage<Scalar> convert_from_rgb(const BasicImage<Scalar>& img, ColorSpace target) {
  if (img.space() != ColorSpace::RGB) throw ParameterError("color conversion expects an RGB image");
  switch (target) {
    case ColorSpace::RGB: return img;
    case ColorSpace::LAB:
      return map_pixels(img, target, [](const Vec3<Scalar>& p) { return normalize_lab<Scalar>(rgb_to_lab(p)); });
    case ColorSpace::HSV:
      return map_pixels(img, target, [](const Vec3<Scalar>& p) { return normalize_hsv<Scalar>(rgb_to_hsv(p)); });
    case ColorSpace::GRAY:
      return map_pixels(img, target, [](const Vec3<Scalar>& p) { return Vec3<Scalar>::Constant(luminance(p)); });
  }
  return img;
}

template <typename Scalar>
BasicImage<Scalar> convert_to_rgb(const BasicImage<Scalar>& img) {
  switch (img.space()) {
    case ColorSpace::RGB: return img;
    case ColorSpace::LAB:
      return map_pixels(img, ColorSpace::RGB,
                        [](const Vec3<Scalar>& p) { return lab_to_rgb<Scalar>(denormalize_lab(p)); });
    case ColorSpace::HSV:
      return map_pixels(img, ColorSpace::RGB,
                        [](const Vec3<Scalar>& p) { return hsv_to_rgb<Scalar>(denormalize_hsv(p)); });
    case ColorSpace::GRAY:
      return map_pixels(img, ColorSpace::RGB, [](const Vec3<Scalar>& p) { return Vec3<Scalar>::Constant(p[0]); });
  }
  return img;
}

#define QPTV2_INSTANTIATE_COLOR(T)                                              \
  template Vec3<T> rgb_to_hsv<T>(const Vec3<T>&);                               \
  template Vec3<T> hsv_to_rgb<T>(const Vec3<T>&);                               \
  template Vec3<T> rgb_to_lab<T>(const Vec3<T>&);                               \
  template Vec3<T> lab_to_rgb<T>(const Vec3<T>&);                               \
  template T luminance<T>(const Vec3<T>&);                                      \
  template Vec3<T> normalize_lab<T>(const Vec3<T>&);                            \
  template Vec3<T> denormalize_lab<T>(const Vec3<T>&);                          \
  template Vec3<T> normalize_hsv<T>(const Vec3<T>&);                            \
  template Vec3<T> denormalize_hsv<T>(const Vec3<T>&);                          \
  template BasicImage<T> convert_from_rgb<T>(const BasicImage<T>&, ColorSpace); \
  template BasicImage<T> convert_to_rgb<T>(const BasicImage<T>&);

QPTV2_INSTANTIATE_COLOR(float)
QPTV2_INSTANTIATE_COLOR(double)

#undef QPTV2_INSTANTIATE_COLOR

}  // namespace color
}  // namespace qptv2
