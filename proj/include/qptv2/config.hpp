#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "qptv2/curation.hpp"
#include "qptv2/imageops.hpp"
#include "qptv2/metrics.hpp"
#include "qptv2/model.hpp"
#include "qptv2/synthbench.hpp"
#include "qptv2/trainer.hpp"

namespace qptv2 {

enum class Profile { Paper, Toy };

std::string_view to_string(Profile p);
Profile parse_profile(std::string_view s);

// Flat namespaced run configuration (data.*, synth.*, degrade.*, model.*,
// pretrain.*, finetune.*, eval.*, plus the top-level seed). Every key exists
// in the profile defaults; values are typed by those defaults.
class RunConfig {
 public:
  enum class Source { Profile, File, Cli };

  static RunConfig for_profile(Profile p);

  Profile profile() const { return profile_; }

  // Nested objects are flattened with '.'; unknown keys are rejected.
  void merge_json(const nlohmann::json& j, Source source);
  void merge_file(const std::filesystem::path& path);
  // Parses `value` according to the key's type.
  void set(const std::string& key, const std::string& value, Source source = Source::Cli);
  void set_json(const std::string& key, const nlohmann::json& value, Source source);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const nlohmann::json& at(const std::string& key) const;
  Source source(const std::string& key) const;

  template <typename T>
  T get(const std::string& key) const {
    return at(key).get<T>();
  }

  std::vector<std::string> keys() const;
  // Closest known keys by edit distance or shared suffix.
  std::vector<std::string> suggestions(const std::string& key, std::size_t max = 3) const;
  // Resolves a short name ("mask_ratio") to the unique full key ending in it.
  std::string resolve_key(const std::string& key) const;

  nlohmann::json to_json() const;
  std::string header() const;  // effective configuration, one "# key = value" line each

 private:
  Profile profile_ = Profile::Toy;
  std::map<std::string, nlohmann::json> values_;
  std::map<std::string, Source> sources_;
  std::map<std::string, std::map<std::string, nlohmann::json>> task_defaults_;
};

std::size_t edit_distance(const std::string& a, const std::string& b);

AutoencoderConfig make_model_config(const RunConfig& c);
DegradationPlan make_degradation_plan(const RunConfig& c);
PretrainRun make_pretrain_run(const RunConfig& c);
FinetuneRun make_finetune_run(const RunConfig& c);
SynthSpec make_synth_spec(const RunConfig& c);
CurationThresholds make_thresholds(const RunConfig& c);
SplitProtocol make_split_protocol(const RunConfig& c);

}  // namespace qptv2
