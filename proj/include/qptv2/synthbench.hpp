#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "qptv2/curation.hpp"
#include "qptv2/image.hpp"
#include "qptv2/imageops.hpp"
#include "qptv2/raster_io.hpp"

namespace qptv2 {

struct SynthSpec {
  int n_images = 64;
  int size = 72;
  double detail_level = 0.5;  // fraction of max_shapes drawn per image
  Range severity_range{0.0, 1.0};
  std::uint64_t seed = 0;
  int max_shapes = 24;
  double blur_max = 2.5;       // blur sigma at severity 1
  double noise_max = 0.08;     // noise sigma at severity 1
  double observer_noise = 0.1; // MOS label noise added by build_manifest

  void validate() const;
};

// Default severity-to-score map, strictly decreasing from 5 to 1.
inline double mos_map(double severity) { return 5.0 - 4.0 * severity; }

struct SynthSample {
  Image image;
  Mask foreground;  // union of shape footprints
  int shapes = 0;
};

int shape_count(const SynthSpec& spec);

// Gradient background plus sinusoidally textured circles and rectangles.
SynthSample gen_texture_sample(const SynthSpec& spec, std::uint64_t index);
Image gen_texture(const SynthSpec& spec, std::uint64_t index);

struct GradedImage {
  Image image;
  double mos = 0.0;
};

// Noise of sigma severity*noise_max followed by blur of sigma severity*blur_max.
GradedImage grade_quality(const Image& img, double severity, const SynthSpec& spec, std::uint64_t noise_seed);

// Severity drawn for item `index` of a manifest.
double sample_severity(const SynthSpec& spec, std::uint64_t index);

// Writes images/, masks/ and manifest.jsonl below out_dir; returns the manifest path.
std::filesystem::path build_manifest(const SynthSpec& spec, const std::filesystem::path& out_dir);

// A texture drifting one pixel per frame diagonally, graded at a fixed severity.
std::vector<Image> gen_video(const SynthSpec& spec, std::uint64_t index, int frames, double severity);

}  // namespace qptv2
