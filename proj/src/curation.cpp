#include "qptv2/curation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "qptv2/error.hpp"

namespace qptv2 {

void CurationRecord::validate() const {
  if (width < 1 || height < 1) throw DataError("record '" + id + "': width and height must be >= 1");
  if (object_count < 0) throw DataError("record '" + id + "': object_count must be >= 0");
  if (fc && !(*fc >= 0.0 && *fc <= 1.0)) throw DataError("record '" + id + "': fc outside [0, 1]");
}

double foreground_coverage(const Mask& mask) {
  if (mask.size() == 0) throw ParameterError("foreground_coverage: empty mask");
  if ((mask > 1).any()) throw ParameterError("foreground_coverage: mask values must be 0 or 1");
  return mask.cast<double>().mean();
}

double foreground_coverage_after_crop(const Mask& mask, int crop_size) {
  if (crop_size <= 0) throw ParameterError("crop_size must be positive");
  const int h = std::min<int>(crop_size, static_cast<int>(mask.rows()));
  const int w = std::min<int>(crop_size, static_cast<int>(mask.cols()));
  const int y0 = (static_cast<int>(mask.rows()) - h) / 2;
  const int x0 = (static_cast<int>(mask.cols()) - w) / 2;
  return foreground_coverage(mask.block(y0, x0, h, w));
}

std::vector<CurationRecord> filter_manifest(const std::vector<CurationRecord>& records,
                                            const CurationThresholds& t) {
  std::vector<CurationRecord> kept;
  std::copy_if(records.begin(), records.end(), std::back_inserter(kept), [&](const CurationRecord& r) {
    return r.object_count >= t.min_objects && std::min(r.width, r.height) >= t.min_short_side &&
           (!r.fc || *r.fc >= t.min_fc);
  });
  return kept;
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * double(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

}  // namespace

ManifestStats manifest_stats(const std::vector<CurationRecord>& records) {
  if (records.empty()) throw ParameterError("manifest_stats: no records");
  ManifestStats s;
  s.count = records.size();
  std::vector<double> objects;
  objects.reserve(records.size());
  for (const auto& r : records) {
    s.mean_width += r.width;
    s.mean_height += r.height;
    objects.push_back(r.object_count);
    if (r.fc) {
      const int bin = std::clamp(static_cast<int>(std::floor(*r.fc * 10.0)), 0, 9);
      ++s.fc_histogram[bin];
      ++s.fc_count;
    }
  }
  s.mean_width /= double(records.size());
  s.mean_height /= double(records.size());
  std::sort(objects.begin(), objects.end());
  for (std::size_t i = 0; i < kObjectCountQuantileLevels.size(); ++i) {
    s.object_count_quantiles[i] = quantile_sorted(objects, kObjectCountQuantileLevels[i]);
  }
  return s;
}

nlohmann::json ManifestStats::to_json() const {
  nlohmann::json q = nlohmann::json::object();
  const char* names[] = {"min", "q25", "median", "q75", "max"};
  for (std::size_t i = 0; i < object_count_quantiles.size(); ++i) q[names[i]] = object_count_quantiles[i];
  return {{"count", count},
          {"mean_width", mean_width},
          {"mean_height", mean_height},
          {"fc_histogram", fc_histogram},
          {"fc_count", fc_count},
          {"object_count_quantiles", q}};
}

nlohmann::json to_json(const CurationRecord& r) {
  nlohmann::json j{{"id", r.id},
                   {"path", r.path.generic_string()},
                   {"width", r.width},
                   {"height", r.height},
                   {"object_count", r.object_count}};
  if (r.fg_mask_path) j["fg_mask_path"] = r.fg_mask_path->generic_string();
  if (r.fc) j["fc"] = *r.fc;
  if (r.mos) j["mos"] = *r.mos;
  if (r.severity) j["severity"] = *r.severity;
  return j;
}

CurationRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("manifest row is not a JSON object");
  CurationRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.path = j.at("path").get<std::string>();
    r.width = j.at("width").get<int>();
    r.height = j.at("height").get<int>();
    r.object_count = j.value("object_count", 0);
    if (j.contains("fg_mask_path") && !j["fg_mask_path"].is_null()) {
      r.fg_mask_path = j["fg_mask_path"].get<std::string>();
    }
    if (j.contains("fc") && !j["fc"].is_null()) r.fc = j["fc"].get<double>();
    if (j.contains("mos") && !j["mos"].is_null()) r.mos = j["mos"].get<double>();
    if (j.contains("severity") && !j["severity"].is_null()) r.severity = j["severity"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest row: ") + e.what());
  }
  r.validate();
  return r;
}

std::vector<CurationRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const std::filesystem::path base = path.parent_path();
  std::vector<CurationRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    CurationRecord r = record_from_json(j);
    if (r.path.is_relative()) r.path = base / r.path;
    if (r.fg_mask_path && r.fg_mask_path->is_relative()) r.fg_mask_path = base / *r.fg_mask_path;
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(const std::filesystem::path& path, const std::vector<CurationRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw IoError("failed writing manifest " + path.string());
}

void fill_coverage_from_masks(std::vector<CurationRecord>& records) {
  for (auto& r : records) {
    if (!r.fc && r.fg_mask_path) r.fc = foreground_coverage(read_mask(*r.fg_mask_path));
  }
}

}  // namespace qptv2
