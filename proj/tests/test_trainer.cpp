#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "qptv2/synthbench.hpp"
#include "qptv2/trainer.hpp"
#include "test_util.hpp"

using namespace qptv2;
using qptv2::test::random_image;
using qptv2::test::scratch_dir;

namespace {

AutoencoderConfig small_model() {
  AutoencoderConfig c;
  c.encoder.patch = 4;
  c.encoder.input_size = 32;
  c.encoder.stage_dims = {8, 12, 16};
  c.encoder.stage_depths = {1, 1, 1};
  c.encoder.heads = 2;
  c.encoder.mlp_ratio = 2;
  c.decoder = {8, 1, 2, 2};
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class TrainerData : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SynthSpec s;
    s.n_images = 64;
    s.size = 40;
    s.seed = 2;
    manifest_ = new std::filesystem::path(build_manifest(s, scratch_dir("trainer_synth")));
  }
  static void TearDownTestSuite() {
    delete manifest_;
    manifest_ = nullptr;
  }

  static PretrainRun pretrain_run(int epochs) {
    PretrainRun r;
    r.manifest = *manifest_;
    r.degrade.steps = {DegradationStep::of(DegradationKind::Cst)};
    r.model = small_model();
    r.mask_ratio = 0.5;
    r.epochs = epochs;
    r.batch_size = 8;
    r.optim.lr = 1e-3;
    r.seed = 11;
    return r;
  }

  static std::vector<LabeledImage> labeled(std::size_t n) {
    auto data = load_labeled(read_manifest(*manifest_));
    data.resize(std::min(n, data.size()));
    return data;
  }

  static FinetuneRun finetune_run(int epochs) {
    FinetuneRun r = FinetuneRun::defaults(FinetuneTask::ImageQuality);
    r.resize_short = 40;
    r.crop = 32;
    r.epochs = epochs;
    r.batch_size = 8;
    r.optim.lr = 3e-3;
    r.seed = 4;
    return r;
  }

  static std::filesystem::path* manifest_;
};

std::filesystem::path* TrainerData::manifest_ = nullptr;

std::uint64_t encoder_checksum(const nn::ParameterStore<double>& store) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : store) {
    if (p.name.rfind("encoder.", 0) != 0) continue;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      std::uint64_t bits;
      const double v = p.value(i);
      std::memcpy(&bits, &v, sizeof bits);
      h = (h ^ bits) * 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace

TEST_F(TrainerData, PretrainLossDecreases) {
  const PretrainResult r = pretrain(pretrain_run(2));
  ASSERT_EQ(r.epoch_mean_loss.size(), 2u);
  EXPECT_EQ(r.log.size(), 16u);
  EXPECT_LT(r.epoch_mean_loss[1], r.epoch_mean_loss[0]);
  EXPECT_EQ(r.skipped_images, 0u);
  for (const auto& rec : r.log) EXPECT_TRUE(std::isfinite(rec.loss));
}

TEST_F(TrainerData, PretrainZeroEpochsKeepsInitialization) {
  const PretrainResult r = pretrain(pretrain_run(0));
  AutoencoderConfig c = small_model();
  c.seed = 11;
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(r.model.params().checksum(), Autoencoder<double>(c).params().checksum());
}

TEST_F(TrainerData, PretrainDeterministicWithByteStableCheckpoints) {
  PretrainRun a = pretrain_run(1), b = pretrain_run(1);
  a.checkpoint_dir = scratch_dir("ckpt_a");
  b.checkpoint_dir = scratch_dir("ckpt_b");
  std::ostringstream la, lb;
  const PretrainResult ra = pretrain(a, &la), rb = pretrain(b, &lb);
  EXPECT_EQ(ra.model.params().checksum(), rb.model.params().checksum());
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_EQ(slurp(a.checkpoint_dir / "checkpoint" / "params.bin"), slurp(b.checkpoint_dir / "checkpoint" / "params.bin"));
  EXPECT_EQ(load_autoencoder(a.checkpoint_dir / "checkpoint").params().checksum(), ra.model.params().checksum());
  PretrainRun c = pretrain_run(1);
  c.seed = 12;
  EXPECT_NE(pretrain(c).model.params().checksum(), ra.model.params().checksum());
}

TEST_F(TrainerData, PretrainSkipsUnreadableImages) {
  const auto dir = scratch_dir("trainer_skip");
  auto recs = read_manifest(*manifest_);
  recs.resize(6);
  recs[2].path = dir / "missing.ppm";
  write_manifest(dir / "m.jsonl", recs);
  PretrainRun r = pretrain_run(1);
  r.manifest = dir / "m.jsonl";
  std::ostringstream warn;
  EXPECT_EQ(pretrain(r, nullptr, &warn).skipped_images, 1u);
  EXPECT_NE(warn.str().find("missing.ppm"), std::string::npos);
}

TEST_F(TrainerData, FrozenBackboneFinetuneLearnsHead) {
  AutoencoderConfig c = small_model();
  const Autoencoder<double> backbone(c);
  const std::uint64_t before = encoder_checksum(backbone.params());
  FinetuneRun run = finetune_run(12);
  run.freeze_backbone = true;
  const FinetuneResult r = finetune(backbone.clone(), run, labeled(32));
  ASSERT_EQ(r.epoch_mean_loss.size(), 12u);
  EXPECT_LT(r.epoch_mean_loss.back(), r.epoch_mean_loss.front());
  EXPECT_EQ(encoder_checksum(r.model.params()), before);
}

TEST_F(TrainerData, ConstantMosIsLearned) {
  auto data = labeled(16);
  for (auto& d : data) d.mos = 3.0;
  FinetuneRun run = finetune_run(80);
  run.optim.lr = 1e-2;
  run.optim.weight_decay = 0.0;
  const FinetuneResult r = finetune(Autoencoder<double>(small_model()), run, data);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(r.model.predict(data[i].image), 3.0, 0.05);
}

TEST_F(TrainerData, ScorerSaveLoadRoundTrip) {
  const FinetuneResult r = finetune(Autoencoder<double>(small_model()), finetune_run(1), labeled(16));
  const auto dir = scratch_dir("scorer");
  save_scorer(dir, r.model);
  const ScoringModel back = load_scorer(dir);
  EXPECT_EQ(back.params().checksum(), r.model.params().checksum());
  const Image img = random_image(40, 48, 3);
  EXPECT_EQ(back.predict(img), r.model.predict(img));
  const ScoreTable t = evaluate(back, labeled(5));
  EXPECT_EQ(t.prediction.size(), 5u);
  EXPECT_EQ(t.mos.size(), 5u);
}

TEST_F(TrainerData, VideoFinetuneRuns) {
  SynthSpec s;
  s.size = 40;
  std::vector<LabeledVideo> vids;
  for (int i = 0; i < 4; ++i) vids.push_back({"v" + std::to_string(i), gen_video(s, std::uint64_t(i), 6, 0.25 * i), 4.0 - i});
  FinetuneRun run = FinetuneRun::defaults(FinetuneTask::VideoQuality);
  run.resize_short = 40;
  run.crop = 32;
  run.epochs = 1;
  run.batch_size = 2;
  run.clips = 2;
  run.clip_len = 4;
  run.t_patch = 2;
  const FinetuneResult r = finetune_video(Autoencoder<double>(small_model()), run, vids);
  EXPECT_TRUE(std::isfinite(r.model.predict_video(vids[0].frames)));
  EXPECT_THROW(finetune(Autoencoder<double>(small_model()), run, labeled(4)), ConfigError);
}

TEST(FinetuneRunValidation, CropMustMatchInput) {
  FinetuneRun r = FinetuneRun::defaults(FinetuneTask::ImageQuality);
  r.crop = 224;
  EXPECT_THROW(r.validate(small_model().encoder), ConfigError);
  EXPECT_EQ(parse_finetune_task("vqa"), FinetuneTask::VideoQuality);
  EXPECT_THROW(parse_finetune_task("nope"), ConfigError);
}

TEST(FiveCrop, HandEnumeratedBoxes) {
  const auto b = five_crop_boxes(340, 340, 224);
  const int expect[5][2] = {{0, 0}, {0, 116}, {116, 0}, {116, 116}, {58, 58}};
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(b[i].y, expect[i][0]);
    EXPECT_EQ(b[i].x, expect[i][1]);
  }
  EXPECT_THROW(five_crop_boxes(100, 340, 224), ParameterError);
}

TEST(FiveCrop, MeanOverCropOrigins) {
  Image img(340, 340);
  for (int y = 0; y < 340; ++y) {
    for (int x = 0; x < 340; ++x) img(y, x, 0) = 1000.0 * y + x;
  }
  const auto origin = [](const Image& c) { return c(0, 0, 0); };
  EXPECT_DOUBLE_EQ(five_crop_predict(origin, img, 224), (0.0 + 116.0 + 116000.0 + 116116.0 + 58058.0) / 5.0);
  EXPECT_DOUBLE_EQ(five_crop_predict([](const Image&) { return 2.5; }, img, 224), 2.5);
}

TEST(FiveCrop, CropSizedAndUndersizedInputs) {
  const Image img = random_image(32, 32, 1);
  const auto mean = [](const Image& c) { return c.channel(1).mean(); };
  EXPECT_DOUBLE_EQ(five_crop_predict(mean, img, 32), mean(img));
  const Image small = random_image(20, 24, 2);
  EXPECT_DOUBLE_EQ(five_crop_predict(mean, small, 32), mean(reflect_pad_to(small, 32, 32)));
}

TEST(VideoClips, UniformStarts) {
  auto starts = [](int n, int clips, int len) {
    std::vector<int> s;
    for (const auto& c : sample_video_clips(n, clips, len)) {
      EXPECT_EQ(int(c.size()), len);
      for (std::size_t t = 1; t < c.size(); ++t) EXPECT_LE(c[t] - c[t - 1], 1);
      s.push_back(c.front());
    }
    return s;
  };
  EXPECT_EQ(starts(128, 4, 32), (std::vector<int>{0, 32, 64, 96}));
  EXPECT_EQ(starts(32, 4, 32), (std::vector<int>{0, 0, 0, 0}));
  EXPECT_EQ(starts(100, 4, 32), (std::vector<int>{0, 22, 45, 68}));
  const auto shortv = sample_video_clips(10, 2, 16);
  EXPECT_EQ(shortv[0].back(), 9);
  EXPECT_EQ(shortv[1].front(), 0);
}

TEST(CosineSchedule, EndpointsWarmupAndMidpoint) {
  const CosineSchedule s{1e-3, 1e-5, 11, 0};
  EXPECT_DOUBLE_EQ(s(0), 1e-3);
  EXPECT_DOUBLE_EQ(s(10), 1e-5);
  EXPECT_NEAR(s(5), 0.5 * (1e-3 + 1e-5), 1e-15);
  for (long t = 1; t < 11; ++t) EXPECT_LT(s(t), s(t - 1));
  const CosineSchedule w{2.0, 0.0, 20, 4};
  EXPECT_DOUBLE_EQ(w(0), 0.5);
  EXPECT_DOUBLE_EQ(w(3), 2.0);
  EXPECT_DOUBLE_EQ(w(4), 2.0);
  EXPECT_NEAR(w(19), 0.0, 1e-15);
}

TEST(AdamW, MatchesHandComputedSteps) {
  nn::Parameter<double> p{"w", nn::Matrix<double>::Constant(1, 1, 2.0), nn::Matrix<double>::Zero(1, 1), true};
  nn::Parameter<double> q{"b", nn::Matrix<double>::Constant(1, 1, 2.0), nn::Matrix<double>::Zero(1, 1), false};
  AdamWConfig cfg{0.1, 0.9, 0.99, 1e-8, 0.5};
  AdamW<double> opt({&p, &q}, cfg);
  double w = 2.0, b = 2.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    const double g = 0.3 * t;
    p.grad(0) = q.grad(0) = g;
    opt.step(0.1);
    m = 0.9 * m + 0.1 * g;
    v = 0.99 * v + 0.01 * g * g;
    const double upd = 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.99, t))) + 1e-8);
    w = w * (1 - 0.1 * 0.5) - upd;
    b = b - upd;
    EXPECT_NEAR(p.value(0), w, 1e-14);
    EXPECT_NEAR(q.value(0), b, 1e-14);
  }
}
