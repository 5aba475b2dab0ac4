#include "qptv2/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "qptv2/error.hpp"

namespace qptv2 {

namespace {

using nlohmann::json;

std::map<std::string, json> shared_defaults() {
  return {
      {"seed", 0},
      {"data.manifest", ""},
      {"data.eval_manifest", ""},
      {"data.min_objects", 50},
      {"data.min_short_side", 0},
      {"data.min_fc", 0.0},
      {"synth.detail_level", 0.5},
      {"synth.severity_lo", 0.0},
      {"synth.severity_hi", 1.0},
      {"synth.max_shapes", 24},
      {"synth.blur_max", 2.5},
      {"synth.noise_max", 0.08},
      {"synth.observer_noise", 0.1},
      {"degrade.kinds", json::array({"cst"})},
      {"degrade.composition", "single"},
      {"degrade.skip_prob", 0.3},
      {"degrade.max_order", 2},
      {"degrade.cst_targets", json::array({"rgb", "lab", "hsv", "gray"})},
      {"model.fuse_stages", json::array({1})},
      {"model.projection", "linear"},
      {"model.fusion", "weighted_pool"},
      {"pretrain.mask_ratio", 0.75},
      {"pretrain.min_lr", 0.0},
      {"pretrain.beta1", 0.9},
      {"pretrain.beta2", 0.95},
      {"pretrain.weight_decay", 0.05},
      {"pretrain.norm_pix_loss", false},
      {"pretrain.checkpoint_every", 0},
      {"finetune.task", "image_quality"},
      {"finetune.beta1", 0.9},
      {"finetune.beta2", 0.999},
      {"finetune.weight_decay", 0.01},
      {"finetune.min_lr", 0.0},
      {"finetune.head_hidden", 0},
      {"finetune.freeze_backbone", false},
      {"finetune.rank_weight", 0.0},
      {"finetune.clips", 4},
      {"finetune.t_patch", 2},
      {"eval.n_splits", 10},
      {"eval.train_frac", 0.8},
  };
}

std::map<std::string, json> paper_defaults() {
  auto d = shared_defaults();
  const std::map<std::string, json> extra{
      {"synth.n_images", 2000},
      {"synth.size", 256},
      {"model.patch", 4},
      {"model.input_size", 224},
      {"model.stage_dims", json::array({96, 192, 384})},
      {"model.stage_depths", json::array({1, 1, 10})},
      {"model.heads", 6},
      {"model.mlp_ratio", 4},
      {"model.decoder_dim", 512},
      {"model.decoder_depth", 8},
      {"model.decoder_heads", 16},
      {"model.decoder_mlp_ratio", 4},
      {"pretrain.epochs", 800},
      {"pretrain.batch_size", 4096},
      {"pretrain.lr", 2.4e-3},
      {"pretrain.warmup_epochs", 40},
      {"finetune.resize_short", 340},
      {"finetune.crop", 224},
      {"finetune.epochs", 200},
      {"finetune.batch_size", 16},
      {"finetune.lr", 2e-5},
      {"finetune.backbone_lr_scale", 1.0},
      {"finetune.clip_len", 32},
  };
  d.insert(extra.begin(), extra.end());
  return d;
}

std::map<std::string, json> toy_defaults() {
  auto d = shared_defaults();
  const std::map<std::string, json> extra{
      {"synth.n_images", 200},
      {"synth.size", 72},
      {"model.patch", 4},
      {"model.input_size", 64},
      {"model.stage_dims", json::array({32, 48, 96})},
      {"model.stage_depths", json::array({1, 1, 2})},
      {"model.heads", 4},
      {"model.mlp_ratio", 2},
      {"model.decoder_dim", 32},
      {"model.decoder_depth", 1},
      {"model.decoder_heads", 4},
      {"model.decoder_mlp_ratio", 2},
      {"pretrain.epochs", 3},
      {"pretrain.batch_size", 32},
      {"pretrain.lr", 1e-4},
      {"pretrain.warmup_epochs", 0},
      {"finetune.resize_short", 72},
      {"finetune.crop", 64},
      {"finetune.epochs", 30},
      {"finetune.batch_size", 16},
      {"finetune.lr", 1e-3},
      {"finetune.backbone_lr_scale", 0.01},
      {"finetune.clip_len", 8},
  };
  d.insert(extra.begin(), extra.end());
  return d;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json parse_scalar_like(const json& proto, const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  try {
    if (proto.is_boolean()) {
      if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
      if (t == "false" || t == "0" || t == "no" || t == "off") return false;
      throw ConfigError("");
    }
    std::size_t used = 0;
    if (proto.is_number_integer()) {
      const long long v = std::stoll(t, &used);
      if (used != t.size()) throw ConfigError("");
      return v;
    }
    if (proto.is_number_float()) {
      const double v = std::stod(t, &used);
      if (used != t.size()) throw ConfigError("");
      return v;
    }
  } catch (const std::exception&) {
    throw ConfigError("invalid value '" + text + "' for " + key + " (expected " + std::string(proto.type_name()) + ")");
  }
  return t;
}

// Accepts `value` for a key whose default is `proto`, converting compatible
// numeric types; throws on a type mismatch.
json coerce(const json& proto, const std::string& key, const json& value) {
  auto mismatch = [&] {
    return ConfigError("type mismatch for " + key + ": expected " + std::string(proto.type_name()) + ", got " +
                       value.dump());
  };
  if (proto.is_array()) {
    if (value.is_string()) {
      json arr = json::array();
      const json elem = proto.empty() ? json("") : proto.front();
      for (const auto& item : split_list(value.get<std::string>())) arr.push_back(parse_scalar_like(elem, key, item));
      return arr;
    }
    if (!value.is_array()) throw mismatch();
    json arr = json::array();
    const json elem = proto.empty() ? json("") : proto.front();
    for (const auto& v : value) arr.push_back(coerce(elem, key, v));
    return arr;
  }
  if (proto.is_number_float()) {
    if (!value.is_number()) throw mismatch();
    return value.get<double>();
  }
  if (proto.is_number_integer()) {
    if (value.is_number_integer()) return value;
    if (value.is_number_float() && value.get<double>() == std::floor(value.get<double>())) {
      return static_cast<long long>(value.get<double>());
    }
    throw mismatch();
  }
  if (proto.is_boolean()) {
    if (!value.is_boolean()) throw mismatch();
    return value;
  }
  if (proto.is_string()) {
    if (!value.is_string()) throw mismatch();
    return value;
  }
  throw mismatch();
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      flatten(*it, key, out);
    } else {
      out.emplace_back(key, *it);
    }
  }
}

}  // namespace

std::string_view to_string(Profile p) { return p == Profile::Paper ? "paper" : "toy"; }

Profile parse_profile(std::string_view s) {
  if (s == "paper") return Profile::Paper;
  if (s == "toy") return Profile::Toy;
  throw ConfigError("unknown profile '" + std::string(s) + "' (expected paper or toy)");
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RunConfig RunConfig::for_profile(Profile p) {
  RunConfig c;
  c.profile_ = p;
  c.values_ = p == Profile::Paper ? paper_defaults() : toy_defaults();
  for (const auto& [k, v] : c.values_) c.sources_[k] = Source::Profile;
  if (p == Profile::Paper) {
    c.task_defaults_["aesthetics"] = {{"finetune.epochs", 60}};
    c.task_defaults_["video_quality"] = {
        {"finetune.epochs", 30}, {"finetune.lr", 1e-3}, {"finetune.weight_decay", 0.05}};
  }
  return c;
}

const nlohmann::json& RunConfig::at(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    std::string msg = "unknown config key '" + key + "'";
    const auto near = suggestions(key);
    if (!near.empty()) {
      msg += "; did you mean";
      for (std::size_t i = 0; i < near.size(); ++i) msg += (i ? ", " : " ") + near[i];
      msg += "?";
    }
    throw ConfigError(msg);
  }
  if (sources_.at(key) == Source::Profile && key.rfind("finetune.", 0) == 0) {
    const auto task = values_.at("finetune.task").get<std::string>();
    const auto td = task_defaults_.find(task);
    if (td != task_defaults_.end()) {
      const auto ov = td->second.find(key);
      if (ov != td->second.end()) return ov->second;
    }
  }
  return it->second;
}

RunConfig::Source RunConfig::source(const std::string& key) const {
  at(key);
  return sources_.at(key);
}

void RunConfig::set_json(const std::string& key, const nlohmann::json& value, Source source) {
  at(key);
  values_[key] = coerce(values_[key], key, value);
  sources_[key] = source;
}

void RunConfig::set(const std::string& key, const std::string& value, Source source) {
  const json& proto = at(key);
  if (proto.is_array()) {
    if (!value.empty() && value.front() == '[') {
      const json parsed = json::parse(value, nullptr, false);
      if (parsed.is_discarded()) throw ConfigError("invalid list '" + value + "' for " + key);
      set_json(key, parsed, source);
      return;
    }
    set_json(key, json(value), source);
  } else {
    values_[key] = parse_scalar_like(proto, key, value);
    sources_[key] = source;
  }
}

void RunConfig::merge_json(const nlohmann::json& j, Source source) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::vector<std::pair<std::string, json>> flat;
  flatten(j, "", flat);
  std::vector<std::string> unknown;
  for (const auto& [k, v] : flat) {
    if (k == "profile") continue;
    if (!values_.count(k)) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) {
      msg += "\n  " + k;
      const auto near = suggestions(k);
      if (!near.empty()) {
        msg += " (did you mean";
        for (std::size_t i = 0; i < near.size(); ++i) msg += (i ? ", " : " ") + near[i];
        msg += "?)";
      }
    }
    throw ConfigError(msg);
  }
  for (const auto& [k, v] : flat) {
    if (k != "profile") set_json(k, v, source);
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw ConfigError("malformed config " + path.string() + ": " + ex.what());
  }
  merge_json(j, Source::File);
}

std::vector<std::string> RunConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

std::vector<std::string> RunConfig::suggestions(const std::string& key, std::size_t max) const {
  std::vector<std::pair<std::size_t, std::string>> scored;
  const std::string tail = key.substr(key.rfind('.') == std::string::npos ? 0 : key.rfind('.') + 1);
  for (const auto& [k, v] : values_) {
    const std::string ktail = k.substr(k.rfind('.') == std::string::npos ? 0 : k.rfind('.') + 1);
    const std::size_t full = edit_distance(key, k);
    const std::size_t part = edit_distance(tail, ktail);
    if (full <= std::max<std::size_t>(2, key.size() / 4) || part <= std::max<std::size_t>(2, tail.size() / 3)) {
      scored.emplace_back(std::min(full, part + 1), k);
    }
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < max; ++i) out.push_back(scored[i].second);
  return out;
}

std::string RunConfig::resolve_key(const std::string& key) const {
  if (values_.count(key)) return key;
  std::vector<std::string> hits;
  for (const auto& [k, v] : values_) {
    if (k.size() > key.size() && k.compare(k.size() - key.size(), key.size(), key) == 0 &&
        k[k.size() - key.size() - 1] == '.') {
      hits.push_back(k);
    }
  }
  if (hits.size() == 1) return hits.front();
  if (hits.size() > 1) {
    std::string msg = "ambiguous config key '" + key + "':";
    for (const auto& h : hits) msg += " " + h;
    throw ConfigError(msg);
  }
  at(key);
  return key;
}

nlohmann::json RunConfig::to_json() const {
  json j;
  j["profile"] = std::string(to_string(profile_));
  for (const auto& [k, v] : values_) j[k] = at(k);
  return j;
}

std::string RunConfig::header() const {
  std::ostringstream os;
  os << "# profile = " << to_string(profile_) << '\n';
  for (const auto& [k, v] : values_) os << "# " << k << " = " << at(k).dump() << '\n';
  return os.str();
}

AutoencoderConfig make_model_config(const RunConfig& c) {
  AutoencoderConfig m;
  m.encoder.patch = c.get<int>("model.patch");
  m.encoder.input_size = c.get<int>("model.input_size");
  const auto dims = c.get<std::vector<int>>("model.stage_dims");
  const auto depths = c.get<std::vector<int>>("model.stage_depths");
  if (dims.size() != 3 || depths.size() != 3) throw ConfigError("model.stage_dims and model.stage_depths need 3 entries");
  std::copy(dims.begin(), dims.end(), m.encoder.stage_dims.begin());
  std::copy(depths.begin(), depths.end(), m.encoder.stage_depths.begin());
  m.encoder.heads = c.get<int>("model.heads");
  m.encoder.mlp_ratio = c.get<int>("model.mlp_ratio");
  m.fusion.fuse_stages = c.get<std::vector<int>>("model.fuse_stages");
  m.fusion.projection = parse_projection_kind(c.get<std::string>("model.projection"));
  m.fusion.fusion = parse_fusion_kind(c.get<std::string>("model.fusion"));
  m.decoder.dim = c.get<int>("model.decoder_dim");
  m.decoder.depth = c.get<int>("model.decoder_depth");
  m.decoder.heads = c.get<int>("model.decoder_heads");
  m.decoder.mlp_ratio = c.get<int>("model.decoder_mlp_ratio");
  m.seed = c.get<std::uint64_t>("seed");
  m.validate();
  return m;
}

DegradationPlan make_degradation_plan(const RunConfig& c) {
  DegradationPlan plan;
  std::vector<ColorSpace> targets;
  for (const auto& t : c.get<std::vector<std::string>>("degrade.cst_targets")) targets.push_back(parse_color_space(t));
  for (const auto& k : c.get<std::vector<std::string>>("degrade.kinds")) {
    if (k == "none") continue;
    DegradationStep s = DegradationStep::of(parse_degradation_kind(k));
    s.cst_targets = targets;
    plan.steps.push_back(s);
  }
  plan.composition = parse_composition(c.get<std::string>("degrade.composition"));
  if (plan.steps.empty() && plan.composition == Composition::Single) plan.composition = Composition::Sequential;
  plan.skip_prob = c.get<double>("degrade.skip_prob");
  plan.max_order = c.get<int>("degrade.max_order");
  plan.crop_size = c.get<int>("model.input_size");
  plan.seed = c.get<std::uint64_t>("seed");
  try {
    plan.validate();
  } catch (const ParameterError& ex) {
    throw ConfigError(std::string("degrade: ") + ex.what());
  }
  return plan;
}

PretrainRun make_pretrain_run(const RunConfig& c) {
  PretrainRun r;
  r.manifest = c.get<std::string>("data.manifest");
  r.degrade = make_degradation_plan(c);
  r.model = make_model_config(c);
  r.mask_ratio = c.get<double>("pretrain.mask_ratio");
  r.epochs = c.get<int>("pretrain.epochs");
  r.batch_size = c.get<int>("pretrain.batch_size");
  r.optim.lr = c.get<double>("pretrain.lr");
  r.optim.beta1 = c.get<double>("pretrain.beta1");
  r.optim.beta2 = c.get<double>("pretrain.beta2");
  r.optim.weight_decay = c.get<double>("pretrain.weight_decay");
  r.min_lr = c.get<double>("pretrain.min_lr");
  r.warmup_epochs = c.get<int>("pretrain.warmup_epochs");
  r.norm_pix_loss = c.get<bool>("pretrain.norm_pix_loss");
  r.checkpoint_every = c.get<long>("pretrain.checkpoint_every");
  r.seed = c.get<std::uint64_t>("seed");
  r.validate();
  return r;
}

FinetuneRun make_finetune_run(const RunConfig& c) {
  FinetuneRun r;
  r.task = parse_finetune_task(c.get<std::string>("finetune.task"));
  r.resize_short = c.get<int>("finetune.resize_short");
  r.crop = c.get<int>("finetune.crop");
  r.epochs = c.get<int>("finetune.epochs");
  r.batch_size = c.get<int>("finetune.batch_size");
  r.optim.lr = c.get<double>("finetune.lr");
  r.optim.beta1 = c.get<double>("finetune.beta1");
  r.optim.beta2 = c.get<double>("finetune.beta2");
  r.optim.weight_decay = c.get<double>("finetune.weight_decay");
  r.min_lr = c.get<double>("finetune.min_lr");
  r.head_hidden = c.get<int>("finetune.head_hidden");
  r.freeze_backbone = c.get<bool>("finetune.freeze_backbone");
  r.backbone_lr_scale = c.get<double>("finetune.backbone_lr_scale");
  r.rank_weight = c.get<double>("finetune.rank_weight");
  r.clips = c.get<int>("finetune.clips");
  r.clip_len = c.get<int>("finetune.clip_len");
  r.t_patch = c.get<int>("finetune.t_patch");
  r.seed = c.get<std::uint64_t>("seed");
  r.validate(make_model_config(c).encoder);
  return r;
}

SynthSpec make_synth_spec(const RunConfig& c) {
  SynthSpec s;
  s.n_images = c.get<int>("synth.n_images");
  s.size = c.get<int>("synth.size");
  s.detail_level = c.get<double>("synth.detail_level");
  s.severity_range = {c.get<double>("synth.severity_lo"), c.get<double>("synth.severity_hi")};
  s.max_shapes = c.get<int>("synth.max_shapes");
  s.blur_max = c.get<double>("synth.blur_max");
  s.noise_max = c.get<double>("synth.noise_max");
  s.observer_noise = c.get<double>("synth.observer_noise");
  s.seed = c.get<std::uint64_t>("seed");
  s.validate();
  return s;
}

CurationThresholds make_thresholds(const RunConfig& c) {
  return {c.get<int>("data.min_objects"), c.get<int>("data.min_short_side"), c.get<double>("data.min_fc")};
}

SplitProtocol make_split_protocol(const RunConfig& c) {
  return {c.get<int>("eval.n_splits"), c.get<double>("eval.train_frac"), c.get<std::uint64_t>("seed")};
}

}  // namespace qptv2
