#include "qptv2/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "qptv2/error.hpp"
#include "qptv2/random.hpp"
#include "qptv2/raster_io.hpp"

namespace qptv2 {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kShuffleTag = 0x5348;
constexpr std::uint64_t kItemTag = 0x4954;
constexpr std::uint64_t kMaskTag = 0x4d41;
constexpr std::uint64_t kHeadTag = 0x4844;

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {kShuffleTag, static_cast<std::uint64_t>(epoch)}));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

long steps_per_epoch(std::size_t n, int batch) { return static_cast<long>((n + std::size_t(batch) - 1) / std::size_t(batch)); }

void emit(std::ostream* out, const LogRecord& r) {
  if (out) *out << r.to_json().dump() << '\n' << std::flush;
}

Image train_view(const Image& img, const ScorerConfig& cfg, Rng& rng) {
  if (cfg.task == FinetuneTask::Aesthetics) return resize_to(img, cfg.crop, cfg.crop);
  return random_crop(resize_short_edge(img, cfg.resize_short), cfg.crop, rng);
}

Image eval_view(const Image& img, const ScorerConfig& cfg) {
  if (cfg.task == FinetuneTask::Aesthetics) return resize_to(img, cfg.crop, cfg.crop);
  const Image r = reflect_pad_to(resize_short_edge(img, cfg.resize_short), cfg.crop, cfg.crop);
  return r.crop((r.height() - cfg.crop) / 2, (r.width() - cfg.crop) / 2, cfg.crop, cfg.crop);
}

std::vector<Image> clip_view(const std::vector<Image>& frames, const ScorerConfig& cfg, Rng* rng) {
  std::vector<Image> resized;
  resized.reserve(frames.size());
  for (const auto& f : frames) {
    resized.push_back(reflect_pad_to(resize_short_edge(f, cfg.resize_short), cfg.crop, cfg.crop));
  }
  const int h = resized.front().height(), w = resized.front().width();
  int y = (h - cfg.crop) / 2, x = (w - cfg.crop) / 2;
  if (rng) {
    y = std::uniform_int_distribution<int>(0, h - cfg.crop)(*rng);
    x = std::uniform_int_distribution<int>(0, w - cfg.crop)(*rng);
  }
  for (auto& f : resized) f = f.crop(y, x, cfg.crop, cfg.crop);
  return resized;
}

struct MosStats {
  double mean = 0.0;
  double std = 1.0;
};

MosStats mos_stats(const std::vector<double>& mos) {
  MosStats s;
  s.mean = std::accumulate(mos.begin(), mos.end(), 0.0) / double(mos.size());
  double var = 0.0;
  for (double m : mos) var += (m - s.mean) * (m - s.mean);
  var /= double(mos.size());
  s.std = var > 1e-12 ? std::sqrt(var) : 1.0;
  return s;
}

nn::Var<double> stack(const std::vector<nn::Var<double>>& rows) {
  nn::Var<double> out = rows.front();
  for (std::size_t i = 1; i < rows.size(); ++i) out = nn::vconcat(out, rows[i]);
  return out;
}

// Mean pairwise hinge max(0, -sign(z_i - z_j) * (p_i - p_j)) over ordered pairs.
nn::Var<double> rank_hinge(const std::vector<nn::Var<double>>& preds, const std::vector<double>& z) {
  nn::Var<double> acc;
  int pairs = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = i + 1; j < preds.size(); ++j) {
      if (z[i] == z[j]) continue;
      const double s = z[i] > z[j] ? 1.0 : -1.0;
      nn::Var<double> h = nn::relu(nn::scale(preds[i] - preds[j], -s));
      acc = pairs == 0 ? h : acc + h;
      ++pairs;
    }
  }
  if (pairs == 0) return {};
  return nn::scale(acc, 1.0 / pairs);
}

// Head (and video embedding) parameters at the base rate, encoder parameters
// at base * backbone_lr_scale unless frozen.
class FinetuneOptimizer {
 public:
  FinetuneOptimizer(ScoringModel& model, const FinetuneRun& run)
      : head_(model.params().select([](const nn::Parameter<double>& p) {
                return !ScoringModel::is_buffer(p.name) &&
                       (p.name.rfind("head.", 0) == 0 || p.name.rfind("video.", 0) == 0);
              }),
              run.optim),
        encoder_(run.freeze_backbone ? std::vector<nn::Parameter<double>*>{}
                                     : model.params().select([](const nn::Parameter<double>& p) {
                                         return p.name.rfind("encoder.", 0) == 0;
                                       }),
                 run.optim),
        scale_(run.backbone_lr_scale) {}

  void step(double lr) {
    head_.step(lr);
    encoder_.step(lr * scale_);
  }

 private:
  AdamW<double> head_, encoder_;
  double scale_;
};

}  // namespace

void PretrainRun::validate() const {
  model.validate();
  degrade.validate();
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw ConfigError("pretrain.mask_ratio must lie in (0, 1)");
  if (epochs < 0) throw ConfigError("pretrain.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("pretrain.batch_size must be >= 1");
  if (warmup_epochs < 0) throw ConfigError("pretrain.warmup_epochs must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("pretrain.checkpoint_every must be >= 0");
  optim.validate();
}

PretrainResult pretrain(const PretrainRun& run, std::ostream* log_out, std::ostream* warn_out) {
  run.validate();
  AutoencoderConfig cfg = run.model;
  cfg.seed = run.seed;
  PretrainResult result{Autoencoder<double>(cfg), {}, {}, 0};
  Autoencoder<double>& model = result.model;
  const EncoderConfig& enc = cfg.encoder;

  const std::vector<CurationRecord> records = read_manifest(run.manifest);
  if (records.empty()) throw DataError("pretrain: manifest " + run.manifest.string() + " is empty");
  std::vector<ImageF> cache;
  std::vector<std::uint64_t> item_ids;
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      cache.push_back(read_image(records[i].path).cast<float>());
      item_ids.push_back(i);
    } catch (const std::exception& ex) {
      ++result.skipped_images;
      if (warn_out) *warn_out << "warning: skipping " << records[i].path.string() << ": " << ex.what() << '\n';
    }
  }
  if (cache.empty()) throw DataError("pretrain: none of the " + std::to_string(records.size()) + " images is readable");

  auto save = [&](const std::filesystem::path& dir, long step) {
    if (!run.checkpoint_dir.empty()) save_autoencoder(run.checkpoint_dir / dir, model, step);
  };

  const long spe = steps_per_epoch(cache.size(), run.batch_size);
  const long total = spe * run.epochs;
  CosineSchedule schedule{run.optim.lr, run.min_lr, total, spe * run.warmup_epochs};
  std::vector<nn::Parameter<double>*> params;
  for (auto& p : model.params()) params.push_back(&p);
  AdamW<double> opt(params, run.optim);
  const PretrainOptions opts{run.norm_pix_loss};
  const int ug = enc.unit_grid();

  long step = 0;
  for (int epoch = 0; epoch < run.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(cache.size(), run.seed, epoch);
    double epoch_loss = 0.0;
    for (long b = 0; b < spe; ++b) {
      const std::size_t lo = std::size_t(b) * std::size_t(run.batch_size);
      const std::size_t hi = std::min(order.size(), lo + std::size_t(run.batch_size));
      model.params().zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = lo; k < hi; ++k) {
        const std::uint64_t item = item_ids[order[k]];
        DegradationPlan plan = run.degrade;
        plan.crop_size = enc.input_size;
        plan.seed = derive_seed(run.seed, {kItemTag, std::uint64_t(epoch), item});
        const Image view = compose(cache[order[k]].cast<double>(), plan);
        const MaskPlan mask =
            sample_mask(ug, ug, run.mask_ratio, derive_seed(run.seed, {kMaskTag, std::uint64_t(epoch), item}), enc.unit());
        nn::Graph<double> g;
        const nn::Var<double> loss = pretrain_loss(model, g, view, mask, opts);
        batch_loss += loss.scalar();
        g.backward(nn::scale(loss, 1.0 / double(hi - lo)));
      }
      batch_loss /= double(hi - lo);
      const double lr = schedule(step);
      opt.step(lr);
      const LogRecord rec{step, epoch, batch_loss, lr};
      result.log.push_back(rec);
      emit(log_out, rec);
      epoch_loss += batch_loss * double(hi - lo);
      ++step;
      if (run.checkpoint_every > 0 && step % run.checkpoint_every == 0 && step < total) {
        save("checkpoint_step" + std::to_string(step), step);
      }
    }
    result.epoch_mean_loss.push_back(epoch_loss / double(cache.size()));
  }
  save("checkpoint", step);
  return result;
}

std::string_view to_string(FinetuneTask t) {
  switch (t) {
    case FinetuneTask::ImageQuality: return "image_quality";
    case FinetuneTask::Aesthetics: return "aesthetics";
    case FinetuneTask::VideoQuality: return "video_quality";
  }
  return "?";
}

FinetuneTask parse_finetune_task(std::string_view s) {
  if (s == "image_quality" || s == "iqa") return FinetuneTask::ImageQuality;
  if (s == "aesthetics" || s == "iaa") return FinetuneTask::Aesthetics;
  if (s == "video_quality" || s == "vqa") return FinetuneTask::VideoQuality;
  throw ConfigError("unknown finetune task '" + std::string(s) + "' (expected image_quality, aesthetics, video_quality)");
}

FinetuneRun FinetuneRun::defaults(FinetuneTask task) {
  FinetuneRun r;
  r.task = task;
  switch (task) {
    case FinetuneTask::ImageQuality:
      r.epochs = 200;
      break;
    case FinetuneTask::Aesthetics:
      r.epochs = 60;
      break;
    case FinetuneTask::VideoQuality:
      r.epochs = 30;
      r.optim.lr = 1e-3;
      r.optim.weight_decay = 0.05;
      break;
  }
  return r;
}

void FinetuneRun::validate(const EncoderConfig& enc) const {
  if (crop != enc.input_size) {
    throw ConfigError("finetune.crop (" + std::to_string(crop) + ") must equal the model input size (" +
                      std::to_string(enc.input_size) + ")");
  }
  if (task != FinetuneTask::Aesthetics && resize_short < crop) throw ConfigError("finetune.resize_short must be >= crop");
  if (epochs < 0) throw ConfigError("finetune.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("finetune.batch_size must be >= 1");
  if (head_hidden < 0) throw ConfigError("finetune.head_hidden must be >= 0");
  if (rank_weight < 0) throw ConfigError("finetune.rank_weight must be >= 0");
  if (!(backbone_lr_scale >= 0)) throw ConfigError("finetune.backbone_lr_scale must be >= 0");
  if (task == FinetuneTask::VideoQuality) {
    if (clips < 1 || clip_len < 1 || t_patch < 1) throw ConfigError("video clips, clip_len and t_patch must be >= 1");
    if (clip_len % t_patch != 0) throw ConfigError("finetune.clip_len must be a multiple of t_patch");
  }
  optim.validate();
}

std::vector<LabeledImage> load_labeled(const std::vector<CurationRecord>& records) {
  std::vector<LabeledImage> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.mos) throw DataError("record '" + r.id + "' has no mos label");
    out.push_back({r.id, read_image(r.path), *r.mos});
  }
  return out;
}

nlohmann::json ScorerConfig::to_json() const {
  return {{"task", std::string(qptv2::to_string(task))},
          {"resize_short", resize_short},
          {"crop", crop},
          {"head_hidden", head_hidden},
          {"t_patch", t_patch},
          {"clips", clips},
          {"clip_len", clip_len},
          {"mos_mean", mos_mean},
          {"mos_std", mos_std}};
}

ScorerConfig ScorerConfig::from_json(const nlohmann::json& j) {
  ScorerConfig c;
  c.task = parse_finetune_task(j.at("task").get<std::string>());
  c.resize_short = j.at("resize_short").get<int>();
  c.crop = j.at("crop").get<int>();
  c.head_hidden = j.at("head_hidden").get<int>();
  c.t_patch = j.at("t_patch").get<int>();
  c.clips = j.at("clips").get<int>();
  c.clip_len = j.at("clip_len").get<int>();
  c.mos_mean = j.at("mos_mean").get<double>();
  c.mos_std = j.at("mos_std").get<double>();
  return c;
}

ScoringModel::ScoringModel(Autoencoder<double> backbone, const ScorerConfig& cfg, std::uint64_t seed)
    : backbone_(std::move(backbone)), cfg_(cfg) {
  const EncoderConfig& enc = backbone_.config().encoder;
  const int d3 = enc.stage_dims[2];
  cfg_.head_hidden = cfg_.head_hidden > 0 ? cfg_.head_hidden : d3;
  Rng rng(derive_seed(seed, {kHeadTag}));
  head_ = nn::Mlp<double>::create(backbone_.params(), "head", d3, cfg_.head_hidden, 1, rng);
  feature_mean_ = &backbone_.params().add("head.feature_mean", nn::Matrix<double>::Zero(1, d3), false);
  feature_scale_ = &backbone_.params().add("head.feature_scale", nn::Matrix<double>::Ones(1, d3), false);
  if (cfg_.task == FinetuneTask::VideoQuality) {
    embed3d_ = &backbone_.params().add("video.patch_embed.weight",
                                       inflate_temporal(backbone_.encoder.patch_embed.weight->value, cfg_.t_patch));
  }
}

nn::Var<double> ScoringModel::head_forward(nn::Var<double> features) const {
  return head_(nn::mul_const(nn::add_const(features, nn::Matrix<double>(-feature_mean_->value)), feature_scale_->value));
}

nn::Var<double> ScoringModel::raw_score(nn::Graph<double>& g, const Image& img) const {
  return head_forward(finetune_features(backbone_, g, img));
}

void ScoringModel::set_standardization(const std::vector<Eigen::VectorXd>& features) {
  if (features.empty()) throw DataError("calibrate: no features");
  const Eigen::Index d = features.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d), var = Eigen::VectorXd::Zero(d);
  for (const auto& f : features) mean += f;
  mean /= double(features.size());
  for (const auto& f : features) var += (f - mean).cwiseAbs2();
  var /= double(features.size());
  feature_mean_->value = mean.transpose();
  feature_scale_->value = var.unaryExpr([](double v) { return v > 1e-12 ? 1.0 / std::sqrt(v) : 1.0; }).transpose();
}

void ScoringModel::calibrate(const std::vector<Image>& views) {
  std::vector<Eigen::VectorXd> feats;
  for (const auto& v : views) feats.push_back(forward_finetune(backbone_, v));
  set_standardization(feats);
}

void ScoringModel::calibrate_clips(const std::vector<std::vector<Image>>& clips) {
  std::vector<Eigen::VectorXd> feats;
  for (const auto& c : clips) {
    nn::Graph<double> g;
    feats.push_back(video_features(backbone_, g, *embed3d_, c, cfg_.t_patch).value().row(0).transpose());
  }
  set_standardization(feats);
}

nn::Var<double> ScoringModel::raw_clip_score(nn::Graph<double>& g, const std::vector<Image>& clip) const {
  if (!embed3d_) throw ConfigError("scoring model was not built for video");
  return head_forward(video_features(backbone_, g, *embed3d_, clip, cfg_.t_patch));
}

double ScoringModel::score(const Image& img) const {
  nn::Graph<double> g;
  return raw_score(g, img).scalar() * cfg_.mos_std + cfg_.mos_mean;
}

double ScoringModel::score_clip(const std::vector<Image>& clip) const {
  nn::Graph<double> g;
  return raw_clip_score(g, clip).scalar() * cfg_.mos_std + cfg_.mos_mean;
}

double ScoringModel::predict(const Image& img) const {
  if (cfg_.task == FinetuneTask::Aesthetics) return score(resize_to(img, cfg_.crop, cfg_.crop));
  return five_crop_predict(*this, resize_short_edge(img, cfg_.resize_short));
}

double ScoringModel::predict_video(const std::vector<Image>& frames) const {
  if (frames.empty()) throw DataError("predict_video: empty video");
  const std::vector<Image> view = clip_view(frames, cfg_, nullptr);
  double sum = 0.0;
  const auto clips = sample_video_clips(view, cfg_.clips, cfg_.clip_len);
  for (const auto& clip : clips) sum += score_clip(clip);
  return sum / double(clips.size());
}

ScoringModel ScoringModel::clone() const {
  ScoringModel copy(backbone_.clone(), cfg_, 0);
  for (auto& p : copy.params()) p.value = params().find(p.name)->value;
  return copy;
}

FinetuneResult finetune(Autoencoder<double> backbone, const FinetuneRun& run, const std::vector<LabeledImage>& data,
                        std::ostream* log_out) {
  run.validate(backbone.config().encoder);
  if (run.task == FinetuneTask::VideoQuality) throw ConfigError("finetune: use finetune_video for video_quality");
  if (data.empty()) throw DataError("finetune: empty dataset");
  std::vector<double> mos;
  for (const auto& d : data) {
    if (!std::isfinite(d.mos)) throw DataError("finetune: item '" + d.id + "' has an invalid mos");
    mos.push_back(d.mos);
  }
  const MosStats stats = mos_stats(mos);
  ScorerConfig sc;
  sc.task = run.task;
  sc.resize_short = run.resize_short;
  sc.crop = run.crop;
  sc.head_hidden = run.head_hidden;
  sc.mos_mean = stats.mean;
  sc.mos_std = stats.std;
  FinetuneResult result{ScoringModel(std::move(backbone), sc, run.seed), {}, {}};
  ScoringModel& model = result.model;
  std::vector<Image> views;
  for (const auto& d : data) views.push_back(eval_view(d.image, sc));
  model.calibrate(views);

  const long spe = steps_per_epoch(data.size(), run.batch_size);
  CosineSchedule schedule{run.optim.lr, run.min_lr, spe * run.epochs, 0};
  FinetuneOptimizer opt(model, run);

  long step = 0;
  for (int epoch = 0; epoch < run.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(data.size(), run.seed, epoch);
    double epoch_loss = 0.0;
    for (long b = 0; b < spe; ++b) {
      const std::size_t lo = std::size_t(b) * std::size_t(run.batch_size);
      const std::size_t hi = std::min(order.size(), lo + std::size_t(run.batch_size));
      model.params().zero_grad();
      nn::Graph<double> g;
      std::vector<nn::Var<double>> preds;
      std::vector<double> z;
      nn::Matrix<double> target(Eigen::Index(hi - lo), 1);
      for (std::size_t k = lo; k < hi; ++k) {
        Rng rng(derive_seed(run.seed, {kItemTag, std::uint64_t(epoch), std::uint64_t(order[k])}));
        preds.push_back(model.raw_score(g, train_view(data[order[k]].image, sc, rng)));
        z.push_back((data[order[k]].mos - stats.mean) / stats.std);
        target(Eigen::Index(k - lo), 0) = z.back();
      }
      nn::Var<double> loss = nn::mse(stack(preds), target);
      if (run.rank_weight > 0) {
        const nn::Var<double> h = rank_hinge(preds, z);
        if (h.graph) loss = loss + nn::scale(h, run.rank_weight);
      }
      g.backward(loss);
      const double lr = schedule(step);
      opt.step(lr);
      const LogRecord rec{step, epoch, loss.scalar(), lr};
      result.log.push_back(rec);
      emit(log_out, rec);
      epoch_loss += loss.scalar() * double(hi - lo);
      ++step;
    }
    result.epoch_mean_loss.push_back(epoch_loss / double(data.size()));
  }
  return result;
}

FinetuneResult finetune_video(Autoencoder<double> backbone, const FinetuneRun& run,
                              const std::vector<LabeledVideo>& data, std::ostream* log_out) {
  run.validate(backbone.config().encoder);
  if (run.task != FinetuneTask::VideoQuality) throw ConfigError("finetune_video: task must be video_quality");
  if (data.empty()) throw DataError("finetune_video: empty dataset");
  std::vector<double> mos;
  for (const auto& d : data) {
    if (d.frames.empty()) throw DataError("finetune_video: item '" + d.id + "' has no frames");
    mos.push_back(d.mos);
  }
  const MosStats stats = mos_stats(mos);
  ScorerConfig sc;
  sc.task = run.task;
  sc.resize_short = run.resize_short;
  sc.crop = run.crop;
  sc.head_hidden = run.head_hidden;
  sc.t_patch = run.t_patch;
  sc.clips = run.clips;
  sc.clip_len = run.clip_len;
  sc.mos_mean = stats.mean;
  sc.mos_std = stats.std;
  FinetuneResult result{ScoringModel(std::move(backbone), sc, run.seed), {}, {}};
  ScoringModel& model = result.model;
  std::vector<std::vector<Image>> first_clips;
  for (const auto& d : data) {
    first_clips.push_back(clip_view(sample_video_clips(d.frames, 1, run.clip_len).front(), sc, nullptr));
  }
  model.calibrate_clips(first_clips);

  const long spe = steps_per_epoch(data.size(), run.batch_size);
  CosineSchedule schedule{run.optim.lr, run.min_lr, spe * run.epochs, 0};
  FinetuneOptimizer opt(model, run);

  long step = 0;
  for (int epoch = 0; epoch < run.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(data.size(), run.seed, epoch);
    double epoch_loss = 0.0;
    for (long b = 0; b < spe; ++b) {
      const std::size_t lo = std::size_t(b) * std::size_t(run.batch_size);
      const std::size_t hi = std::min(order.size(), lo + std::size_t(run.batch_size));
      model.params().zero_grad();
      nn::Graph<double> g;
      std::vector<nn::Var<double>> preds;
      nn::Matrix<double> target(Eigen::Index(hi - lo), 1);
      for (std::size_t k = lo; k < hi; ++k) {
        const LabeledVideo& v = data[order[k]];
        Rng rng(derive_seed(run.seed, {kItemTag, std::uint64_t(epoch), std::uint64_t(order[k])}));
        const int n = static_cast<int>(v.frames.size());
        const int start = std::uniform_int_distribution<int>(0, std::max(0, n - run.clip_len))(rng);
        std::vector<Image> clip;
        for (int t = 0; t < run.clip_len; ++t) clip.push_back(v.frames[std::size_t(std::min(start + t, n - 1))]);
        preds.push_back(model.raw_clip_score(g, clip_view(clip, sc, &rng)));
        target(Eigen::Index(k - lo), 0) = (v.mos - stats.mean) / stats.std;
      }
      const nn::Var<double> loss = nn::mse(stack(preds), target);
      g.backward(loss);
      const double lr = schedule(step);
      opt.step(lr);
      const LogRecord rec{step, epoch, loss.scalar(), lr};
      result.log.push_back(rec);
      emit(log_out, rec);
      epoch_loss += loss.scalar() * double(hi - lo);
      ++step;
    }
    result.epoch_mean_loss.push_back(epoch_loss / double(data.size()));
  }
  return result;
}

std::array<CropBox, 5> five_crop_boxes(int height, int width, int crop) {
  if (crop < 1 || height < crop || width < crop) throw ParameterError("five_crop_boxes: crop exceeds image");
  const int by = height - crop, bx = width - crop;
  return {CropBox{0, 0}, CropBox{0, bx}, CropBox{by, 0}, CropBox{by, bx}, CropBox{by / 2, bx / 2}};
}

double five_crop_predict(const std::function<double(const Image&)>& score, const Image& img, int crop) {
  const Image padded = reflect_pad_to(img, crop, crop);
  double sum = 0.0;
  for (const CropBox& b : five_crop_boxes(padded.height(), padded.width(), crop)) {
    sum += score(padded.crop(b.y, b.x, crop, crop));
  }
  return sum / 5.0;
}

double five_crop_predict(const ScoringModel& model, const Image& img) {
  return five_crop_predict([&model](const Image& c) { return model.score(c); }, img, model.config().crop);
}

std::vector<std::vector<int>> sample_video_clips(int n_frames, int clips, int clip_len) {
  if (n_frames < 1) throw ParameterError("sample_video_clips: video has no frames");
  if (clips < 1 || clip_len < 1) throw ParameterError("sample_video_clips: clips and clip_len must be >= 1");
  const int range = std::max(0, n_frames - clip_len);
  std::vector<std::vector<int>> out;
  for (int i = 0; i < clips; ++i) {
    const int start = clips == 1 ? 0 : static_cast<int>((long(i) * range) / (clips - 1));
    std::vector<int> idx(static_cast<std::size_t>(clip_len));
    for (int t = 0; t < clip_len; ++t) idx[std::size_t(t)] = std::min(start + t, n_frames - 1);
    out.push_back(std::move(idx));
  }
  return out;
}

void save_scorer(const std::filesystem::path& dir, const ScoringModel& model) {
  nlohmann::json m;
  m["kind"] = "scorer";
  m["model"] = to_json(model.backbone().config());
  m["seed"] = model.backbone().config().seed;
  m["scorer"] = model.config().to_json();
  m["checksum"] = model.params().checksum();
  save_checkpoint(dir, m, model.params());
}

ScoringModel load_scorer(const std::filesystem::path& dir) {
  const Checkpoint ckpt = load_checkpoint(dir);
  if (ckpt.manifest.value("kind", std::string()) != "scorer") {
    throw DataError("checkpoint in " + dir.string() + " is not a finetuned scorer");
  }
  ScoringModel model(Autoencoder<double>(autoencoder_config_from_json(ckpt.manifest.at("model"))),
                     ScorerConfig::from_json(ckpt.manifest.at("scorer")), 0);
  assign_tensors(model.params(), ckpt.tensors);
  return model;
}

ScoreTable evaluate(const ScoringModel& model, const std::vector<LabeledImage>& data) {
  ScoreTable t;
  for (const auto& d : data) {
    t.prediction.push_back(model.predict(d.image));
    t.mos.push_back(d.mos);
  }
  return t;
}

}  // namespace qptv2
