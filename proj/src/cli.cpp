#include "qptv2/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qptv2/config.hpp"
#include "qptv2/error.hpp"
#include "qptv2/raster_io.hpp"

namespace qptv2 {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  std::string config_path;
  std::string profile;
  std::string seed;
  std::string out;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;  // subcommand flags bound to config keys
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON config file (nested or flat keys)");
  sub->add_option("--profile", c.profile, "Default profile")->check(CLI::IsMember({"paper", "toy"}));
  sub->add_option("--seed", c.seed, "Run seed");
  sub->add_option("--out", c.out, "Output directory");
  sub->add_option("--set", c.sets, "Override a config key, key=value (repeatable; short names allowed)");
}

void bind_key(CLI::App* sub, Common& c, const std::string& flag, const std::string& key, const std::string& help) {
  sub->add_option_function<std::string>(
      flag, [&c, key](const std::string& v) { c.flags[key] = v; }, help + " [" + key + "]");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

RunConfig build_config(const Common& c) {
  json file;
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw IoError("cannot read config " + c.config_path);
    try {
      file = json::parse(in);
    } catch (const json::exception& ex) {
      throw ConfigError("malformed config " + c.config_path + ": " + ex.what());
    }
  }
  Profile profile = Profile::Toy;
  if (!c.profile.empty()) {
    profile = parse_profile(c.profile);
  } else if (file.is_object() && file.contains("profile")) {
    profile = parse_profile(file["profile"].get<std::string>());
  }
  RunConfig cfg = RunConfig::for_profile(profile);
  if (!file.is_null()) cfg.merge_json(file, RunConfig::Source::File);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    cfg.set(cfg.resolve_key(s.substr(0, eq)), s.substr(eq + 1));
  }
  for (const auto& [k, v] : c.flags) cfg.set(k, v);
  if (!c.seed.empty()) cfg.set("seed", c.seed);
  return cfg;
}

fs::path prepare_out(const Common& c, const std::string& sub, const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = c.out.empty() ? fs::path("qptv2_" + sub) : fs::path(c.out);
  fs::create_directories(dir);
  out << cfg.header();
  write_json(dir / "config.json", cfg.to_json());
  write_text(dir / "run.log", cfg.header());
  return dir;
}

void append_log(const fs::path& dir, const std::string& line) {
  std::ofstream os(dir / "run.log", std::ios::app);
  os << line << '\n';
}

fs::path cache_root(const fs::path& out_dir) {
  if (const char* env = std::getenv("QPTV2_CACHE"); env != nullptr && *env != '\0') return env;
  return out_dir / "cache";
}

// Builds (or reuses) a synthetic labeled manifest keyed by the synthesis settings.
fs::path synth_dataset(const SynthSpec& s, const fs::path& root, std::ostream& out) {
  const json key = {{"n_images", s.n_images},         {"size", s.size},
                    {"detail_level", s.detail_level}, {"severity", {s.severity_range.lo, s.severity_range.hi}},
                    {"seed", s.seed},                 {"max_shapes", s.max_shapes},
                    {"blur_max", s.blur_max},         {"noise_max", s.noise_max},
                    {"observer_noise", s.observer_noise}};
  const fs::path dir = root / ("synth-" + hex64(fnv1a(key.dump())));
  const fs::path manifest = dir / "manifest.jsonl";
  if (fs::exists(manifest)) return manifest;
  const fs::path tmp = dir.string() + ".partial";
  fs::remove_all(tmp);
  out << "# synthesizing " << s.n_images << " images into " << dir.string() << '\n';
  build_manifest(s, tmp);
  fs::create_directories(dir.parent_path());
  fs::rename(tmp, dir);
  return manifest;
}

fs::path dataset_manifest(const RunConfig& cfg, const std::string& key, const fs::path& out_dir, std::ostream& out) {
  const auto path = cfg.get<std::string>(key);
  if (!path.empty()) return path;
  return synth_dataset(make_synth_spec(cfg), cache_root(out_dir), out);
}

std::vector<LabeledImage> subset(const std::vector<LabeledImage>& data, const std::vector<std::size_t>& idx) {
  std::vector<LabeledImage> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(data[i]);
  return out;
}

std::vector<LabeledVideo> synth_videos(const SynthSpec& spec, int first, int count, int frames) {
  std::vector<LabeledVideo> out;
  for (int i = first; i < first + count; ++i) {
    const double sev = sample_severity(spec, static_cast<std::uint64_t>(i));
    out.push_back({"video_" + std::to_string(i), gen_video(spec, static_cast<std::uint64_t>(i), frames, sev),
                   mos_map(sev)});
  }
  return out;
}

json log_summary(const std::vector<double>& epoch_loss) { return json(epoch_loss); }

json table_json(const ScoreTable& t) { return {{"n", t.mos.size()}, {"srcc", srcc(t)}, {"plcc", plcc(t)}}; }

std::string report_markdown(const ProtocolReport& r) {
  std::vector<TableRow> rows;
  for (const auto& s : r.splits) rows.push_back({std::to_string(s.index), s.srcc, s.plcc});
  rows.push_back({"mean", r.mean_srcc, r.mean_plcc});
  return render_markdown_table("Split", rows);
}

int cmd_curate(const Common& c, const std::string& manifest, std::ostream& out) {
  RunConfig cfg = build_config(c);
  const fs::path dir = prepare_out(c, "curate", cfg, out);
  const fs::path input = manifest.empty() ? fs::path(cfg.get<std::string>("data.manifest")) : fs::path(manifest);
  if (input.empty()) throw ConfigError("curate needs --manifest or data.manifest");
  auto records = read_manifest(input);
  fill_coverage_from_masks(records);
  const auto kept = filter_manifest(records, make_thresholds(cfg));
  write_manifest(dir / "curated.jsonl", kept);
  const json stats = {{"input", manifest_stats(records).to_json()},
                      {"output", manifest_stats(kept).to_json()},
                      {"kept", kept.size()},
                      {"dropped", records.size() - kept.size()}};
  write_json(dir / "stats.json", stats);
  append_log(dir, "kept " + std::to_string(kept.size()) + " of " + std::to_string(records.size()));
  out << stats.dump(2) << '\n';
  return kExitOk;
}

int cmd_synth(const Common& c, std::ostream& out) {
  RunConfig cfg = build_config(c);
  const fs::path dir = prepare_out(c, "synth", cfg, out);
  const SynthSpec spec = make_synth_spec(cfg);
  const fs::path manifest = build_manifest(spec, dir);
  const json summary = {{"manifest", manifest.string()}, {"n_images", spec.n_images}};
  write_json(dir / "summary.json", summary);
  out << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_pretrain(const Common& c, std::ostream& out, std::ostream& err) {
  RunConfig cfg = build_config(c);
  const fs::path dir = prepare_out(c, "pretrain", cfg, out);
  PretrainRun run = make_pretrain_run(cfg);
  run.manifest = dataset_manifest(cfg, "data.manifest", dir, out);
  run.checkpoint_dir = dir;
  std::ofstream log(dir / "log.jsonl");
  const PretrainResult res = pretrain(run, &log, &err);
  const json summary = {{"epoch_mean_loss", log_summary(res.epoch_mean_loss)},
                        {"steps", res.log.size()},
                        {"skipped_images", res.skipped_images},
                        {"checksum", hex64(res.model.params().checksum())},
                        {"checkpoint", (dir / "checkpoint").string()}};
  write_json(dir / "summary.json", summary);
  append_log(dir, summary.dump());
  out << summary.dump(2) << '\n';
  return kExitOk;
}

Autoencoder<double> initial_backbone(const RunConfig& cfg, const std::string& init) {
  if (init.empty()) return Autoencoder<double>(make_model_config(cfg));
  return load_autoencoder(init);
}

int cmd_finetune(const Common& c, const std::string& init, std::ostream& out) {
  RunConfig cfg = build_config(c);
  const fs::path dir = prepare_out(c, "finetune", cfg, out);
  const FinetuneRun run = make_finetune_run(cfg);
  Autoencoder<double> backbone = initial_backbone(cfg, init);
  std::ofstream log(dir / "log.jsonl");
  json summary;
  if (run.task == FinetuneTask::VideoQuality) {
    const SynthSpec spec = make_synth_spec(cfg);
    const int frames = 2 * run.clip_len;
    const auto train = synth_videos(spec, 0, spec.n_images, frames);
    const auto res = finetune_video(std::move(backbone), run, train, &log);
    save_scorer(dir / "scorer", res.model);
    const auto held = synth_videos(spec, spec.n_images, std::max(4, spec.n_images / 4), frames);
    ScoreTable t;
    for (const auto& v : held) {
      t.prediction.push_back(res.model.predict_video(v.frames));
      t.mos.push_back(v.mos);
    }
    summary = {{"epoch_mean_loss", log_summary(res.epoch_mean_loss)},
               {"n_train", train.size()},
               {"eval", table_json(t)}};
  } else {
    const auto train = load_labeled(read_manifest(dataset_manifest(cfg, "data.manifest", dir, out)));
    const auto res = finetune(std::move(backbone), run, train, &log);
    save_scorer(dir / "scorer", res.model);
    summary = {{"epoch_mean_loss", log_summary(res.epoch_mean_loss)}, {"n_train", train.size()}};
    const auto eval_path = cfg.get<std::string>("data.eval_manifest");
    if (!eval_path.empty()) summary["eval"] = table_json(evaluate(res.model, load_labeled(read_manifest(eval_path))));
  }
  summary["scorer"] = (dir / "scorer").string();
  write_json(dir / "summary.json", summary);
  append_log(dir, summary.dump());
  out << summary.dump(2) << '\n';
  return kExitOk;
}

struct EvalFlags {
  bool oracle = false;
  bool protocol = false;
  std::string scorer;
  std::string init;
};

int cmd_eval(const Common& c, const EvalFlags& f, std::ostream& out) {
  RunConfig cfg = build_config(c);
  const fs::path dir = prepare_out(c, "eval", cfg, out);
  const auto records = read_manifest(dataset_manifest(cfg, "data.manifest", dir, out));
  const SplitProtocol protocol = make_split_protocol(cfg);
  json report;
  std::string markdown;
  if (f.oracle) {
    std::vector<double> mos;
    for (const auto& r : records) {
      if (!r.mos) throw DataError("record " + r.id + " has no mos");
      mos.push_back(*r.mos);
    }
    const auto rep = run_split_protocol(mos, protocol, [&mos](const std::vector<std::size_t>&, int) {
      return Predictor([&mos](std::size_t i) { return mos[i]; });
    });
    report = rep.to_json();
    markdown = report_markdown(rep);
  } else {
    const auto data = load_labeled(records);
    std::vector<double> mos;
    for (const auto& d : data) mos.push_back(d.mos);
    if (!f.scorer.empty()) {
      const ScoringModel model = load_scorer(f.scorer);
      std::vector<double> pred;
      for (const auto& d : data) pred.push_back(model.predict(d.image));
      if (f.protocol) {
        const auto rep = run_split_protocol(mos, protocol, [&pred](const std::vector<std::size_t>&, int) {
          return Predictor([&pred](std::size_t i) { return pred[i]; });
        });
        report = rep.to_json();
        markdown = report_markdown(rep);
      } else {
        const ScoreTable t{pred, mos};
        report = table_json(t);
        markdown = render_markdown_table("Scorer", {{"all", srcc(t), plcc(t)}});
      }
    } else {
      const FinetuneRun run = make_finetune_run(cfg);
      const Autoencoder<double> backbone = initial_backbone(cfg, f.init);
      const auto rep = run_split_protocol(mos, protocol, [&](const std::vector<std::size_t>& train, int s) {
        std::ofstream log(dir / ("log_split" + std::to_string(s) + ".jsonl"));
        FinetuneRun split_run = run;
        split_run.seed = derive_seed(run.seed, {static_cast<std::uint64_t>(s)});
        auto res = std::make_shared<FinetuneResult>(finetune(backbone.clone(), split_run, subset(data, train), &log));
        return Predictor([res, &data](std::size_t i) { return res->model.predict(data[i].image); });
      });
      report = rep.to_json();
      markdown = report_markdown(rep);
    }
  }
  write_json(dir / "report.json", report);
  write_text(dir / "report.md", markdown);
  append_log(dir, report.dump());
  out << markdown;
  return kExitOk;
}

// Grid values for list-valued keys use '+' between elements; "none" is the empty list.
std::string grid_value(const RunConfig& cfg, const std::string& key, std::string v) {
  if (!cfg.at(key).is_array()) return v;
  if (v == "none") return "";
  for (auto& ch : v) {
    if (ch == '+') ch = ',';
  }
  return v;
}

int cmd_ablate(const Common& c, const std::vector<std::string>& grid_specs, std::ostream& out, std::ostream& err) {
  RunConfig cfg = build_config(c);
  const fs::path dir = prepare_out(c, "ablate", cfg, out);
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;
  for (const auto& spec : grid_specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("--grid expects key=v1,v2,..., got '" + spec + "'");
    const std::string key = cfg.resolve_key(spec.substr(0, eq));
    std::vector<std::string> values;
    std::stringstream ss(spec.substr(eq + 1));
    std::string v;
    while (std::getline(ss, v, ',')) {
      if (!v.empty()) values.push_back(v);
    }
    if (values.empty()) throw ConfigError("--grid " + key + " has no values");
    grid.emplace_back(key, values);
  }
  if (grid.empty()) throw ConfigError("ablate needs at least one --grid key=v1,v2,...");

  const fs::path pre_manifest = dataset_manifest(cfg, "data.manifest", dir, out);
  const auto eval_path = cfg.get<std::string>("data.eval_manifest");
  const auto data = load_labeled(read_manifest(eval_path.empty() ? pre_manifest : fs::path(eval_path)));
  const Split split = make_splits(data.size(), {1, cfg.get<double>("eval.train_frac"), cfg.get<std::uint64_t>("seed")})
                          .front();
  const auto train = subset(data, split.train);
  const auto test = subset(data, split.test);

  std::size_t n_cells = 1;
  for (const auto& g : grid) n_cells *= g.second.size();
  std::string header;
  for (std::size_t k = 0; k < grid.size(); ++k) header += (k ? ", " : "") + grid[k].first;

  std::vector<TableRow> rows;
  json cells = json::array();
  std::vector<std::size_t> odo(grid.size(), 0);
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    RunConfig cell_cfg = cfg;
    std::string label;
    json values = json::object();
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto& [key, vals] = grid[k];
      const std::string& v = vals[odo[k]];
      cell_cfg.set(key, grid_value(cell_cfg, key, v));
      label += (k ? ", " : "") + v;
      values[key] = cell_cfg.at(key);
    }
    char name[32];
    std::snprintf(name, sizeof name, "cell%03zu", cell);
    const fs::path cell_dir = dir / "cells" / name;
    fs::create_directories(cell_dir);
    write_json(cell_dir / "config.json", cell_cfg.to_json());
    write_text(cell_dir / "run.log", cell_cfg.header());

    PretrainRun prun = make_pretrain_run(cell_cfg);
    prun.manifest = pre_manifest;
    prun.checkpoint_dir = cell_dir;
    std::ofstream plog(cell_dir / "pretrain_log.jsonl");
    PretrainResult pres = pretrain(prun, &plog, &err);
    const FinetuneRun frun = make_finetune_run(cell_cfg);
    if (frun.task == FinetuneTask::VideoQuality) throw ConfigError("ablate runs image tasks only");
    std::ofstream flog(cell_dir / "finetune_log.jsonl");
    const auto fres = finetune(std::move(pres.model), frun, train, &flog);
    const ScoreTable t = evaluate(fres.model, test);
    const TableRow row{label, srcc(t), plcc(t)};
    rows.push_back(row);
    cells.push_back({{"cell", cell},
                     {"values", values},
                     {"srcc", row.srcc},
                     {"plcc", row.plcc},
                     {"pretrain_loss", log_summary(pres.epoch_mean_loss)},
                     {"finetune_loss", log_summary(fres.epoch_mean_loss)}});
    append_log(cell_dir, cells.back().dump());
    out << "# cell " << cell + 1 << "/" << n_cells << " [" << label << "] srcc " << row.srcc << " plcc " << row.plcc
        << '\n';
    for (std::size_t k = grid.size(); k-- > 0;) {
      if (++odo[k] < grid[k].second.size()) break;
      odo[k] = 0;
    }
  }
  const std::string table = render_markdown_table(header, rows);
  json keys = json::array();
  for (const auto& g : grid) keys.push_back(g.first);
  const json report = {{"grid", keys}, {"n_train", train.size()}, {"n_test", test.size()}, {"cells", cells}};
  write_json(dir / "ablation.json", report);
  write_text(dir / "ablation.md", table);
  append_log(dir, report.dump());
  out << table;
  return kExitOk;
}

int cmd_spectrum(const Common& c, const std::string& image, int samples, std::ostream& out) {
  RunConfig cfg = build_config(c);
  const fs::path dir = prepare_out(c, "spectrum", cfg, out);
  std::vector<SpectrumProfile> profiles;
  json source;
  if (!image.empty()) {
    profiles.push_back(radial_spectrum(read_image(image)));
    source = {{"image", image}};
  } else {
    if (samples < 1) throw ConfigError("--samples must be >= 1");
    const SynthSpec spec = make_synth_spec(cfg);
    for (int i = 0; i < samples; ++i) profiles.push_back(radial_spectrum(gen_texture(spec, std::uint64_t(i))));
    source = {{"synthetic", samples}, {"detail_level", spec.detail_level}};
  }
  const auto& first = profiles.front().bins;
  json bins = json::array();
  double high = 0.0;
  std::size_t n_high = 0;
  const double mid = first.empty() ? 0.0 : first.back().freq_hi / 2.0;
  for (std::size_t b = 0; b < first.size(); ++b) {
    double mean = 0.0;
    for (const auto& p : profiles) mean += p.bins[b].log_magnitude;
    mean /= double(profiles.size());
    bins.push_back({{"freq_lo", first[b].freq_lo}, {"freq_hi", first[b].freq_hi}, {"log_magnitude", mean}});
    if (first[b].freq_lo >= mid) {
      high += mean;
      ++n_high;
    }
  }
  const json report = {{"source", source},
                       {"bins", bins},
                       {"high_band_log_magnitude", n_high ? high / double(n_high) : 0.0}};
  write_json(dir / "spectrum.json", report);
  out << report.dump(2) << '\n';
  return kExitOk;
}

void report_error(std::ostream& err, const std::string& type, const std::string& message, int code) {
  err << json{{"error", {{"type", type}, {"message", message}, {"exit_code", code}}}}.dump() << '\n';
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quality-aware pretraining toolkit for visual scoring models", "qptv2"};
  app.require_subcommand(1, 1);
  Common common;

  auto* curate = app.add_subcommand("curate", "Filter a manifest and report its statistics");
  add_common(curate, common);
  std::string curate_manifest;
  curate->add_option("--manifest", curate_manifest, "Input manifest (line-delimited JSON)");
  bind_key(curate, common, "--min-objects", "data.min_objects", "Minimum object count");
  bind_key(curate, common, "--min-short-side", "data.min_short_side", "Minimum short side in pixels");
  bind_key(curate, common, "--min-fc", "data.min_fc", "Minimum foreground coverage");

  auto* synth = app.add_subcommand("synth", "Write a synthetic labeled manifest");
  add_common(synth, common);
  bind_key(synth, common, "--n-images", "synth.n_images", "Number of images");
  bind_key(synth, common, "--size", "synth.size", "Image side in pixels");
  bind_key(synth, common, "--detail", "synth.detail_level", "Detail level in [0, 1]");

  auto* pre = app.add_subcommand("pretrain", "Masked image modeling pretraining");
  add_common(pre, common);
  bind_key(pre, common, "--manifest", "data.manifest", "Pretraining manifest (synthesized when empty)");
  bind_key(pre, common, "--mask-ratio", "pretrain.mask_ratio", "Masking ratio");
  bind_key(pre, common, "--epochs", "pretrain.epochs", "Epochs");

  auto* ft = app.add_subcommand("finetune", "Train a scoring head on labeled data");
  add_common(ft, common);
  std::string ft_init;
  ft->add_option("--init", ft_init, "Pretraining checkpoint directory");
  bind_key(ft, common, "--manifest", "data.manifest", "Labeled manifest (synthesized when empty)");
  bind_key(ft, common, "--eval-manifest", "data.eval_manifest", "Held-out labeled manifest");
  bind_key(ft, common, "--task", "finetune.task", "image_quality, aesthetics or video_quality");
  bind_key(ft, common, "--epochs", "finetune.epochs", "Epochs");

  auto* ev = app.add_subcommand("eval", "Evaluate predictions with SRCC and PLCC");
  add_common(ev, common);
  EvalFlags eval_flags;
  ev->add_flag("--oracle", eval_flags.oracle, "Predict each item's own MOS");
  ev->add_flag("--protocol", eval_flags.protocol, "Repeated random train/test splits");
  ev->add_option("--scorer", eval_flags.scorer, "Scorer directory written by finetune");
  ev->add_option("--init", eval_flags.init, "Pretraining checkpoint for per-split finetuning");
  bind_key(ev, common, "--manifest", "data.manifest", "Labeled manifest (synthesized when empty)");
  bind_key(ev, common, "--splits", "eval.n_splits", "Number of splits");

  auto* abl = app.add_subcommand("ablate", "Sweep a grid of config values through pretrain, finetune and eval");
  add_common(abl, common);
  std::vector<std::string> grid;
  abl->add_option("--grid", grid, "key=v1,v2,... (repeatable; list values join elements with '+')")->required();

  auto* spec = app.add_subcommand("spectrum", "Radial log-magnitude spectrum of an image or synthetic textures");
  add_common(spec, common);
  std::string spectrum_image;
  int spectrum_samples = 50;
  spec->add_option("--image", spectrum_image, "Image file (PPM/PGM)");
  spec->add_option("--samples", spectrum_samples, "Synthetic samples to average when no image is given");
  bind_key(spec, common, "--detail", "synth.detail_level", "Detail level of synthetic samples");

  std::vector<std::string> argv_store{"qptv2"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    report_error(err, "UsageError", e.what(), kExitUsage);
    err << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*curate) return cmd_curate(common, curate_manifest, out);
    if (*synth) return cmd_synth(common, out);
    if (*pre) return cmd_pretrain(common, out, err);
    if (*ft) return cmd_finetune(common, ft_init, out);
    if (*ev) return cmd_eval(common, eval_flags, out);
    if (*abl) return cmd_ablate(common, grid, out, err);
    if (*spec) return cmd_spectrum(common, spectrum_image, spectrum_samples, out);
  } catch (const ConfigError& e) {
    report_error(err, "ConfigError", e.what(), kExitUsage);
    return kExitUsage;
  } catch (const ParameterError& e) {
    report_error(err, "ParameterError", e.what(), kExitUsage);
    return kExitUsage;
  } catch (const DataError& e) {
    report_error(err, "DataError", e.what(), kExitData);
    return kExitData;
  } catch (const ProtocolError& e) {
    report_error(err, "ProtocolError", e.what(), kExitData);
    return kExitData;
  } catch (const CorrelationError& e) {
    report_error(err, "CorrelationError", e.what(), kExitData);
    return kExitData;
  } catch (const IoError& e) {
    report_error(err, "IoError", e.what(), kExitIo);
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    report_error(err, "IoError", e.what(), kExitIo);
    return kExitIo;
  } catch (const std::exception& e) {
    report_error(err, "Error", e.what(), kExitFailure);
    return kExitFailure;
  }
  return kExitUsage;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace qptv2
