#include "qptv2/model.hpp"

#include <set>

namespace qptv2 {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void EncoderConfig::validate() const {
  require(patch >= 1, "encoder.patch must be >= 1");
  require(stage_dims[0] >= 1 && stage_dims[0] <= stage_dims[1] && stage_dims[1] <= stage_dims[2],
          "encoder.stage_dims must satisfy 1 <= d1 <= d2 <= d3");
  for (int d : stage_depths) require(d >= 1, "encoder.stage_depths must all be >= 1");
  require(input_size >= unit() && input_size % unit() == 0,
          "encoder.input_size " + std::to_string(input_size) + " must be divisible by patch*4 = " +
              std::to_string(unit()));
  require(heads >= 1 && stage_dims[2] % heads == 0, "encoder.heads must divide d3");
  require(stage_dims[0] % 4 == 0, "d1 must be divisible by 4 for the positional embedding");
  require(mlp_ratio >= 1, "encoder.mlp_ratio must be >= 1");
}

std::string_view to_string(ProjectionKind k) { return k == ProjectionKind::Linear ? "linear" : "mlp"; }
std::string_view to_string(FusionKind k) { return k == FusionKind::WeightedPool ? "weighted_pool" : "sum"; }

ProjectionKind parse_projection_kind(std::string_view s) {
  if (s == "linear") return ProjectionKind::Linear;
  if (s == "mlp") return ProjectionKind::Mlp;
  throw ConfigError("unknown projection '" + std::string(s) + "' (expected linear or mlp)");
}

FusionKind parse_fusion_kind(std::string_view s) {
  if (s == "weighted_pool" || s == "pool") return FusionKind::WeightedPool;
  if (s == "sum") return FusionKind::Sum;
  throw ConfigError("unknown fusion '" + std::string(s) + "' (expected weighted_pool or sum)");
}

std::vector<int> FusionConfig::routed_stages() const {
  if (!enabled()) return {3};
  std::vector<int> out{3};
  std::set<int> sorted(fuse_stages.begin(), fuse_stages.end());
  out.insert(out.end(), sorted.begin(), sorted.end());
  return out;
}

void FusionConfig::validate() const {
  std::set<int> seen;
  for (int s : fuse_stages) {
    require(s == 1 || s == 2, "fusion.fuse_stages entries must be 1 or 2 (stage 3 is always routed)");
    require(seen.insert(s).second, "fusion.fuse_stages contains duplicates");
  }
}

void DecoderConfig::validate() const {
  require(dim >= 4 && dim % 4 == 0, "decoder.dim must be a positive multiple of 4");
  require(depth >= 0, "decoder.depth must be >= 0");
  require(heads >= 1 && dim % heads == 0, "decoder.heads must divide decoder.dim");
  require(mlp_ratio >= 1, "decoder.mlp_ratio must be >= 1");
}

void AutoencoderConfig::validate() const {
  encoder.validate();
  fusion.validate();
  decoder.validate();
}

nlohmann::json to_json(const AutoencoderConfig& c) {
  return {
      {"encoder",
       {{"patch", c.encoder.patch},
        {"stage_dims", c.encoder.stage_dims},
        {"stage_depths", c.encoder.stage_depths},
        {"heads", c.encoder.heads},
        {"input_size", c.encoder.input_size},
        {"mlp_ratio", c.encoder.mlp_ratio}}},
      {"fusion",
       {{"fuse_stages", c.fusion.fuse_stages},
        {"projection", std::string(to_string(c.fusion.projection))},
        {"fusion", std::string(to_string(c.fusion.fusion))}}},
      {"decoder",
       {{"dim", c.decoder.dim},
        {"depth", c.decoder.depth},
        {"heads", c.decoder.heads},
        {"mlp_ratio", c.decoder.mlp_ratio}}},
      {"seed", c.seed},
  };
}

AutoencoderConfig autoencoder_config_from_json(const nlohmann::json& j) {
  try {
    AutoencoderConfig c;
    const auto& e = j.at("encoder");
    c.encoder.patch = e.at("patch").get<int>();
    c.encoder.stage_dims = e.at("stage_dims").get<std::array<int, 3>>();
    c.encoder.stage_depths = e.at("stage_depths").get<std::array<int, 3>>();
    c.encoder.heads = e.at("heads").get<int>();
    c.encoder.input_size = e.at("input_size").get<int>();
    c.encoder.mlp_ratio = e.value("mlp_ratio", 2);
    const auto& f = j.at("fusion");
    c.fusion.fuse_stages = f.at("fuse_stages").get<std::vector<int>>();
    c.fusion.projection = parse_projection_kind(f.at("projection").get<std::string>());
    c.fusion.fusion = parse_fusion_kind(f.at("fusion").get<std::string>());
    const auto& d = j.at("decoder");
    c.decoder.dim = d.at("dim").get<int>();
    c.decoder.depth = d.at("depth").get<int>();
    c.decoder.heads = d.at("heads").get<int>();
    c.decoder.mlp_ratio = d.value("mlp_ratio", 2);
    c.seed = j.value("seed", std::uint64_t{0});
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed model config: ") + ex.what());
  }
}

template class Autoencoder<double>;

}  // namespace qptv2
