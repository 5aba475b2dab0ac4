#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qptv2/checkpoint.hpp"
#include "qptv2/curation.hpp"
#include "qptv2/imageops.hpp"
#include "qptv2/metrics.hpp"
#include "qptv2/model.hpp"
#include "qptv2/optim.hpp"

namespace qptv2 {

struct LogRecord {
  long step = 0;
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;

  nlohmann::json to_json() const { return {{"step", step}, {"epoch", epoch}, {"loss", loss}, {"lr", lr}}; }
};

struct PretrainRun {
  std::filesystem::path manifest;
  DegradationPlan degrade;  // crop_size is forced to the model input size
  AutoencoderConfig model;  // model.seed is taken from `seed`
  double mask_ratio = 0.75;
  int epochs = 1;
  int batch_size = 16;
  AdamWConfig optim;
  int warmup_epochs = 0;
  double min_lr = 0.0;
  bool norm_pix_loss = false;
  std::uint64_t seed = 0;
  long checkpoint_every = 0;            // steps; 0 keeps only the final checkpoint
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints written

  void validate() const;
};

struct PretrainResult {
  Autoencoder<double> model;
  std::vector<LogRecord> log;
  std::vector<double> epoch_mean_loss;
  std::size_t skipped_images = 0;
};

// Runs masked-image-modeling pretraining on the images of a manifest.
// `log_out` receives one JSON object per optimizer step; warnings about
// unreadable images go to `warn_out`.
PretrainResult pretrain(const PretrainRun& run, std::ostream* log_out = nullptr, std::ostream* warn_out = nullptr);

enum class FinetuneTask { ImageQuality, Aesthetics, VideoQuality };

std::string_view to_string(FinetuneTask t);
FinetuneTask parse_finetune_task(std::string_view s);

struct FinetuneRun {
  FinetuneTask task = FinetuneTask::ImageQuality;
  int resize_short = 340;  // image quality only
  int crop = 224;
  int epochs = 200;
  int batch_size = 16;
  AdamWConfig optim{2e-5, 0.9, 0.999, 1e-8, 0.01};
  double min_lr = 0.0;
  int head_hidden = 0;  // 0: same width as the encoder output
  bool freeze_backbone = false;
  double backbone_lr_scale = 1.0;  // encoder learning rate = lr * scale
  double rank_weight = 0.0;  // optional pairwise hinge term
  int clips = 4;             // video only
  int clip_len = 32;
  int t_patch = 2;
  std::uint64_t seed = 0;

  static FinetuneRun defaults(FinetuneTask task);
  void validate(const EncoderConfig& enc) const;
};

struct LabeledImage {
  std::string id;
  Image image;
  double mos = 0.0;
};

struct LabeledVideo {
  std::string id;
  std::vector<Image> frames;
  double mos = 0.0;
};

// Loads the images of labeled records; throws DataError for a record without MOS.
std::vector<LabeledImage> load_labeled(const std::vector<CurationRecord>& records);

struct ScorerConfig {
  FinetuneTask task = FinetuneTask::ImageQuality;
  int resize_short = 340;
  int crop = 224;
  int head_hidden = 0;
  int t_patch = 2;
  int clips = 4;
  int clip_len = 32;
  double mos_mean = 0.0;  // scores are regressed in standardized units
  double mos_std = 1.0;

  nlohmann::json to_json() const;
  static ScorerConfig from_json(const nlohmann::json& j);
};

// Encoder plus regression head (Linear - GELU - Linear to one scalar) applied
// to standardized pooled features. Head and video parameters live in the
// backbone's store under "head." and "video."; the standardization buffers
// head.feature_mean and head.feature_scale are not trained.
class ScoringModel {
 public:
  ScoringModel(Autoencoder<double> backbone, const ScorerConfig& cfg, std::uint64_t seed);

  Autoencoder<double>& backbone() { return backbone_; }
  const Autoencoder<double>& backbone() const { return backbone_; }
  nn::ParameterStore<double>& params() { return backbone_.params(); }
  const nn::ParameterStore<double>& params() const { return backbone_.params(); }
  const ScorerConfig& config() const { return cfg_; }
  ScorerConfig& config() { return cfg_; }

  // Standardized score of one input-sized image.
  nn::Var<double> raw_score(nn::Graph<double>& g, const Image& img) const;
  // Standardized score of one clip of input-sized frames.
  nn::Var<double> raw_clip_score(nn::Graph<double>& g, const std::vector<Image>& clip) const;

  double score(const Image& img) const;
  double score_clip(const std::vector<Image>& clip) const;

  // Task-specific test pipeline: resize, then five-crop (image quality) or a
  // single direct resize (aesthetics).
  double predict(const Image& img) const;
  // Averages clip scores over uniformly sampled clips.
  double predict_video(const std::vector<Image>& frames) const;

  // Sets the feature standardization from features of `views` (images or
  // clips matching the task).
  void calibrate(const std::vector<Image>& views);
  void calibrate_clips(const std::vector<std::vector<Image>>& clips);

  ScoringModel clone() const;

  static bool is_buffer(const std::string& name) {
    return name == "head.feature_mean" || name == "head.feature_scale";
  }

 private:
  nn::Var<double> head_forward(nn::Var<double> features) const;
  void set_standardization(const std::vector<Eigen::VectorXd>& features);

  Autoencoder<double> backbone_;
  ScorerConfig cfg_;
  nn::Mlp<double> head_;
  nn::Parameter<double>* feature_mean_ = nullptr;
  nn::Parameter<double>* feature_scale_ = nullptr;
  nn::Parameter<double>* embed3d_ = nullptr;
};

struct FinetuneResult {
  ScoringModel model;
  std::vector<LogRecord> log;
  std::vector<double> epoch_mean_loss;
};

FinetuneResult finetune(Autoencoder<double> backbone, const FinetuneRun& run, const std::vector<LabeledImage>& data,
                        std::ostream* log_out = nullptr);
FinetuneResult finetune_video(Autoencoder<double> backbone, const FinetuneRun& run,
                              const std::vector<LabeledVideo>& data, std::ostream* log_out = nullptr);

struct CropBox {
  int y = 0;
  int x = 0;
};

// Top-left, top-right, bottom-left, bottom-right, center.
std::array<CropBox, 5> five_crop_boxes(int height, int width, int crop);

// Mean score over the five crops; undersized images are reflect-padded first.
double five_crop_predict(const std::function<double(const Image&)>& score, const Image& img, int crop);
double five_crop_predict(const ScoringModel& model, const Image& img);

// Frame indices of `clips` clips of `clip_len` frames with starts
// floor(i * (T - clip_len) / (clips - 1)); short clips repeat the last frame.
std::vector<std::vector<int>> sample_video_clips(int n_frames, int clips = 4, int clip_len = 32);

template <typename Frame>
std::vector<std::vector<Frame>> sample_video_clips(const std::vector<Frame>& video, int clips = 4, int clip_len = 32) {
  std::vector<std::vector<Frame>> out;
  for (const auto& idx : sample_video_clips(static_cast<int>(video.size()), clips, clip_len)) {
    std::vector<Frame> clip;
    clip.reserve(idx.size());
    for (int i : idx) clip.push_back(video[static_cast<std::size_t>(i)]);
    out.push_back(std::move(clip));
  }
  return out;
}

void save_scorer(const std::filesystem::path& dir, const ScoringModel& model);
ScoringModel load_scorer(const std::filesystem::path& dir);

ScoreTable evaluate(const ScoringModel& model, const std::vector<LabeledImage>& data);

}  // namespace qptv2
