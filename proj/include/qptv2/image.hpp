#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <string>
#include <string_view>

#include "qptv2/error.hpp"

namespace qptv2 {

enum class ColorSpace { RGB, LAB, HSV, GRAY };

std::string_view to_string(ColorSpace space);
ColorSpace parse_color_space(std::string_view name);

template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Three-channel raster with values normalized to [0, 1]. GRAY images keep
// three (identical) channels so every space has the same shape.
template <typename Scalar>
class BasicImage {
 public:
  using PlaneType = Plane<Scalar>;
  static constexpr int kChannels = 3;

  BasicImage() = default;

  BasicImage(int height, int width, ColorSpace space = ColorSpace::RGB) : space_(space) {
    if (height < 1 || width < 1) {
      throw ParameterError("image dimensions must be positive, got " + std::to_string(height) + "x" +
                           std::to_string(width));
    }
    for (auto& p : planes_) p = PlaneType::Zero(height, width);
  }

  static BasicImage constant(int height, int width, Scalar value, ColorSpace space = ColorSpace::RGB) {
    BasicImage img(height, width, space);
    for (auto& p : img.planes_) p.setConstant(value);
    return img;
  }

  static BasicImage constant_rgb(int height, int width, Scalar r, Scalar g, Scalar b) {
    BasicImage img(height, width);
    img.planes_[0].setConstant(r);
    img.planes_[1].setConstant(g);
    img.planes_[2].setConstant(b);
    return img;
  }

  int height() const { return static_cast<int>(planes_[0].rows()); }
  int width() const { return static_cast<int>(planes_[0].cols()); }
  bool empty() const { return planes_[0].size() == 0; }

  ColorSpace space() const { return space_; }
  void set_space(ColorSpace s) { space_ = s; }

  PlaneType& channel(int c) { return planes_[c]; }
  const PlaneType& channel(int c) const { return planes_[c]; }

  Scalar& operator()(int y, int x, int c) { return planes_[c](y, x); }
  Scalar operator()(int y, int x, int c) const { return planes_[c](y, x); }

  Scalar min_value() const {
    return std::min({planes_[0].minCoeff(), planes_[1].minCoeff(), planes_[2].minCoeff()});
  }
  Scalar max_value() const {
    return std::max({planes_[0].maxCoeff(), planes_[1].maxCoeff(), planes_[2].maxCoeff()});
  }

  // Mean over channels, the luminance proxy used by spectral statistics.
  PlaneType channel_mean() const { return (planes_[0] + planes_[1] + planes_[2]) / Scalar(3); }

  void clip01() {
    for (auto& p : planes_) p = p.max(Scalar(0)).min(Scalar(1));
  }

  template <typename Other>
  BasicImage<Other> cast() const {
    BasicImage<Other> out(height(), width(), space_);
    for (int c = 0; c < kChannels; ++c) out.channel(c) = planes_[c].template cast<Other>();
    return out;
  }

  BasicImage crop(int y0, int x0, int h, int w) const {
    if (y0 < 0 || x0 < 0 || h < 1 || w < 1 || y0 + h > height() || x0 + w > width()) {
      throw ParameterError("crop window out of bounds");
    }
    BasicImage out(h, w, space_);
    for (int c = 0; c < kChannels; ++c) out.planes_[c] = planes_[c].block(y0, x0, h, w);
    return out;
  }

  bool operator==(const BasicImage& o) const {
    if (space_ != o.space_ || height() != o.height() || width() != o.width()) return false;
    for (int c = 0; c < kChannels; ++c)
      if (!(planes_[c] == o.planes_[c]).all()) return false;
    return true;
  }

 private:
  std::array<PlaneType, kChannels> planes_;
  ColorSpace space_ = ColorSpace::RGB;
};

using Image = BasicImage<double>;
using ImageF = BasicImage<float>;

template <typename Scalar>
Scalar max_abs_diff(const BasicImage<Scalar>& a, const BasicImage<Scalar>& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ParameterError("max_abs_diff: shape mismatch");
  }
  Scalar m = 0;
  for (int c = 0; c < 3; ++c) m = std::max(m, (a.channel(c) - b.channel(c)).abs().maxCoeff());
  return m;
}

}  // namespace qptv2
