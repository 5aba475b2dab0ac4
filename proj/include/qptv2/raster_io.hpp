#pragma once

#include <cstdint>
#include <filesystem>

#include "qptv2/image.hpp"

namespace qptv2 {

using Mask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Binary netpbm I/O. Color images go through P6 (or P5, replicated to three
// channels); 16-bit samples are written so the [0, 1] values survive with
// 1/65535 resolution.
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img, int bit_depth = 16);

// Reads a P5 mask and binarizes it at half the max value.
Mask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& mask);

}  // namespace qptv2
