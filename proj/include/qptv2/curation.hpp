#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qptv2/raster_io.hpp"

namespace qptv2 {

// One row of a line-delimited JSON manifest. Unknown keys are ignored on read.
struct CurationRecord {
  std::string id;
  std::filesystem::path path;
  int width = 1;
  int height = 1;
  int object_count = 0;
  std::optional<std::filesystem::path> fg_mask_path;
  std::optional<double> fc;
  std::optional<double> mos;       // present in labeled manifests
  std::optional<double> severity;  // synthetic manifests only

  void validate() const;
};

struct CurationThresholds {
  int min_objects = 50;
  int min_short_side = 0;
  double min_fc = 0.0;
};

struct ManifestStats {
  std::size_t count = 0;
  double mean_width = 0.0;
  double mean_height = 0.0;
  std::array<int, 10> fc_histogram{};  // bin i covers [i/10, (i+1)/10), last bin closed
  std::size_t fc_count = 0;            // records contributing to the histogram
  std::array<double, 5> object_count_quantiles{};  // min, q25, median, q75, max

  nlohmann::json to_json() const;
};

inline constexpr std::array<double, 5> kObjectCountQuantileLevels{0.0, 0.25, 0.5, 0.75, 1.0};

double foreground_coverage(const Mask& mask);

// Coverage over the centered size x size window (clamped to the mask), the
// stand-in for coverage measured after random cropping.
double foreground_coverage_after_crop(const Mask& mask, int crop_size);

std::vector<CurationRecord> filter_manifest(const std::vector<CurationRecord>& records,
                                            const CurationThresholds& thresholds);

ManifestStats manifest_stats(const std::vector<CurationRecord>& records);

nlohmann::json to_json(const CurationRecord& r);
CurationRecord record_from_json(const nlohmann::json& j);

// Relative image/mask paths are resolved against the manifest's directory.
std::vector<CurationRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<CurationRecord>& records);

// Fills `fc` from `fg_mask_path` for records that have a mask but no coverage.
void fill_coverage_from_masks(std::vector<CurationRecord>& records);

}  // namespace qptv2
