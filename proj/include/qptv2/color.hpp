#pragma once

#include <Eigen/Core>

#include "qptv2/image.hpp"

namespace qptv2::color {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

// Per-pixel conversions. All RGB values are gamma-encoded sRGB in [0, 1].
// The *_normalized variants map each channel affinely into [0, 1]:
//   LAB: (L / 100, (a + 128) / 255, (b + 128) / 255)
//   HSV: (H / 360, S, V)

template <typename Scalar>
Vec3<Scalar> rgb_to_hsv(const Vec3<Scalar>& rgb);  // H in degrees [0, 360)
template <typename Scalar>
Vec3<Scalar> hsv_to_rgb(const Vec3<Scalar>& hsv);
template <typename Scalar>
Vec3<Scalar> rgb_to_lab(const Vec3<Scalar>& rgb);  // CIE L*a*b*, D65 white
template <typename Scalar>
Vec3<Scalar> lab_to_rgb(const Vec3<Scalar>& lab);
template <typename Scalar>
Scalar luminance(const Vec3<Scalar>& rgb);  // Rec. 601 luma

template <typename Scalar>
Vec3<Scalar> normalize_lab(const Vec3<Scalar>& lab);
template <typename Scalar>
Vec3<Scalar> denormalize_lab(const Vec3<Scalar>& v);
template <typename Scalar>
Vec3<Scalar> normalize_hsv(const Vec3<Scalar>& hsv);
template <typename Scalar>
Vec3<Scalar> denormalize_hsv(const Vec3<Scalar>& v);

// Image-level conversion from RGB into `target` (normalized). RGB -> RGB is a copy.
template <typename Scalar>
BasicImage<Scalar> convert_from_rgb(const BasicImage<Scalar>& img, ColorSpace target);

// Inverse of convert_from_rgb. GRAY maps to a neutral RGB image.
template <typename Scalar>
BasicImage<Scalar> convert_to_rgb(const BasicImage<Scalar>& img);

}  // namespace qptv2::color
