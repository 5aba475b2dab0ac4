#include <gtest/gtest.h>

#include <numeric>

#include "gradcheck.hpp"
#include "qptv2/model.hpp"
#include "test_util.hpp"

using namespace qptv2;
using qptv2::test::random_image;

namespace {

AutoencoderConfig toy(int patch = 8) {
  AutoencoderConfig c;
  c.encoder.patch = patch;
  c.encoder.input_size = 64;
  c.encoder.stage_dims = {16, 24, 32};
  c.encoder.stage_depths = {1, 1, 2};
  c.encoder.heads = 4;
  c.encoder.mlp_ratio = 2;
  c.decoder = {16, 1, 4, 2};
  c.seed = 5;
  return c;
}

// Closed-form parameter count written out from the layer shapes.
struct Count {
  std::int64_t encoder = 0, projection = 0, fusion = 0, decoder = 0;
};

Count analytic_count(const AutoencoderConfig& c) {
  const std::int64_t p = c.encoder.patch, r = c.encoder.mlp_ratio;
  const std::int64_t d1 = c.encoder.stage_dims[0], d2 = c.encoder.stage_dims[1], d3 = c.encoder.stage_dims[2];
  const std::int64_t D = c.decoder.dim, rd = c.decoder.mlp_ratio;
  auto mlp_block = [&](std::int64_t d) { return 2 * d + (d * r * d + r * d) + (r * d * d + d); };
  auto attn_block = [](std::int64_t d, std::int64_t ratio) {
    return 4 * d + (d * 3 * d + 3 * d) + (d * d + d) + (d * ratio * d + ratio * d) + (ratio * d * d + d);
  };
  Count n;
  n.encoder = (3 * p * p * d1 + d1) + c.encoder.stage_depths[0] * mlp_block(d1) + (8 * d1 + 4 * d1 * d2 + d2) +
              c.encoder.stage_depths[1] * mlp_block(d2) + (8 * d2 + 4 * d2 * d3 + d3) +
              c.encoder.stage_depths[2] * attn_block(d3, r) + 2 * d3;
  const std::int64_t dims[3] = {d1, d2, d3};
  if (c.fusion.enabled()) {
    std::vector<int> stages{3};
    stages.insert(stages.end(), c.fusion.fuse_stages.begin(), c.fusion.fuse_stages.end());
    for (int s : stages) {
      const std::int64_t in = dims[s - 1];
      n.projection += c.fusion.projection == ProjectionKind::Linear ? in * D + D : (in * D + D) + (D * D + D);
    }
    if (c.fusion.fusion == FusionKind::WeightedPool) n.fusion = std::int64_t(stages.size());
  } else {
    n.decoder += d3 * D + D;
  }
  const std::int64_t unit = 4 * p;
  n.decoder += D + c.decoder.depth * attn_block(D, rd) + 2 * D + (D * unit * unit * 3 + unit * unit * 3);
  return n;
}

double max_abs(const nn::Matrix<double>& a, const nn::Matrix<double>& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Autoencoder, ParameterCountsMatchClosedForm) {
  for (const auto& stages : {std::vector<int>{}, std::vector<int>{1}, std::vector<int>{1, 2}}) {
    for (auto proj : {ProjectionKind::Linear, ProjectionKind::Mlp}) {
      for (auto fus : {FusionKind::WeightedPool, FusionKind::Sum}) {
        AutoencoderConfig c = toy();
        c.fusion = {stages, proj, fus};
        const Autoencoder<double> m(c);
        const Count n = analytic_count(c);
        const auto rep = m.parameter_report();
        EXPECT_EQ(rep.at("encoder"), n.encoder);
        EXPECT_EQ(rep.at("projection"), n.projection);
        EXPECT_EQ(rep.at("fusion"), n.fusion);
        EXPECT_EQ(rep.at("decoder"), n.decoder);
        EXPECT_EQ(rep.at("total"), n.encoder + n.projection + n.fusion + n.decoder);
      }
    }
  }
}

TEST(Autoencoder, DisabledFusionHasNoFusionParameters) {
  AutoencoderConfig c = toy();
  c.fusion.fuse_stages = {};
  const Autoencoder<double> m(c);
  EXPECT_EQ(m.params().count("fusion."), 0);
  EXPECT_NE(m.params().find("decoder.embed.weight"), nullptr);
}

TEST(Autoencoder, SeedDeterminism) {
  AutoencoderConfig c = toy();
  EXPECT_EQ(Autoencoder<double>(c).params().checksum(), Autoencoder<double>(c).params().checksum());
  AutoencoderConfig d = c;
  d.seed = 6;
  EXPECT_NE(Autoencoder<double>(c).params().checksum(), Autoencoder<double>(d).params().checksum());
  EXPECT_EQ(Autoencoder<double>(c).clone().params().checksum(), Autoencoder<double>(c).params().checksum());
}

TEST(Autoencoder, ConfigValidationAndJson) {
  AutoencoderConfig c = toy();
  c.fusion.fuse_stages = {3};
  EXPECT_THROW(c.validate(), ConfigError);
  c = toy();
  c.fusion.fuse_stages = {1, 1};
  EXPECT_THROW(c.validate(), ConfigError);
  c = toy();
  c.fusion = {{1, 2}, ProjectionKind::Mlp, FusionKind::Sum};
  const AutoencoderConfig back = autoencoder_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_THROW(parse_fusion_kind("max"), ConfigError);
}

TEST(Forward, ShapesAcrossMaskRatios) {
  const Autoencoder<double> m(toy(4));
  const Image img = random_image(64, 64, 1);
  const int ug = m.config().encoder.unit_grid();
  for (double ratio : {0.3, 0.6, 0.75, 0.9}) {
    const MaskPlan plan = sample_mask(ug, ug, ratio, 3);
    nn::Graph<double> g;
    const auto feats = encode_stages(m, g, visible_fine_patches(m, img, plan));
    const int vis = ug * ug - plan.masked_count();
    EXPECT_EQ(feats.x[2].rows(), vis);
    EXPECT_EQ(feats.x[1].rows(), 4 * vis);
    EXPECT_EQ(feats.x[0].rows(), 16 * vis);
    EXPECT_EQ(feats.x[2].cols(), 32);
    const auto fused = fuse_multiscale(m, feats);
    EXPECT_EQ(fused.rows(), vis);
    EXPECT_EQ(fused.cols(), 16);
    const auto rec = decode_reconstruct(m, fused, feats, plan);
    EXPECT_EQ(rec.pred.rows(), plan.masked_count());
    EXPECT_EQ(rec.pred.cols(), 16 * 16 * 3);
    EXPECT_EQ(rec.positions, plan.masked_indices());
    EXPECT_TRUE(rec.pred.value().allFinite());
    const double loss = forward_pretrain(m, img, plan);
    EXPECT_TRUE(std::isfinite(loss));
    EXPECT_GE(loss, 0.0);
  }
}

TEST(Forward, VisibleTokenOrderDoesNotMatter) {
  const Autoencoder<double> m(toy());
  const Image img = random_image(64, 64, 2);
  const MaskPlan plan = mask_from_flags(2, 2, {1, 0, 0, 1});
  const PatchSet<double> vis = visible_fine_patches(m, img, plan);
  PatchSet<double> shuffled = vis;
  std::vector<int> order(vis.positions.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), Rng(9));
  for (std::size_t i = 0; i < order.size(); ++i) {
    shuffled.tokens.row(Eigen::Index(i)) = vis.tokens.row(order[i]);
    shuffled.positions[i] = vis.positions[order[i]];
  }
  nn::Graph<double> g;
  const auto a = encode_stages(m, g, vis), b = encode_stages(m, g, shuffled);
  EXPECT_EQ(a.positions[2], b.positions[2]);
  EXPECT_EQ(a.x[2].value(), b.x[2].value());
}

TEST(Forward, RejectsBadInputs) {
  const Autoencoder<double> m(toy());
  const Image img = random_image(64, 64, 3);
  EXPECT_THROW(forward_pretrain(m, random_image(32, 32, 3), sample_mask(2, 2, 0.5, 0)), ParameterError);
  EXPECT_THROW(forward_pretrain(m, img, sample_mask(3, 3, 0.5, 0)), ParameterError);
  nn::Graph<double> g;
  EXPECT_THROW(encode_stages(m, g, patchify(img, 4)), ParameterError);
  // Every unit masked leaves the encoder nothing to work on.
  EXPECT_THROW(forward_pretrain(m, img, mask_from_flags(2, 2, {1, 1, 1, 1})), ParameterError);
}

TEST(Fusion, DisabledEqualsDecoderEmbedding) {
  AutoencoderConfig c = toy();
  c.fusion.fuse_stages = {};
  const Autoencoder<double> m(c);
  nn::Graph<double> g;
  const auto feats = encode_stages(m, g, patchify(random_image(64, 64, 4), 8));
  const nn::Matrix<double> x3 = feats.x[2].value();
  const nn::Matrix<double> expect =
      (x3 * m.decoder.embed.weight->value.transpose()).rowwise() + m.decoder.embed.bias->value.row(0);
  EXPECT_LT(max_abs(fuse_multiscale(m, feats).value(), expect), 1e-12);
}

TEST(Fusion, SaturatedWeightsSelectStageThree) {
  Autoencoder<double> m(toy());
  m.fusion.logits->value << 0.0, -1e300;
  nn::Graph<double> g;
  const auto feats = encode_stages(m, g, patchify(random_image(64, 64, 5), 8));
  const auto& proj3 = m.fusion.proj[0].linear;
  const nn::Matrix<double> expect =
      (feats.x[2].value() * proj3.weight->value.transpose()).rowwise() + proj3.bias->value.row(0);
  EXPECT_LT(max_abs(fuse_multiscale(m, feats).value(), expect), 1e-12);
}

TEST(Fusion, SumMatchesDirectRecomputation) {
  AutoencoderConfig c = toy();
  c.fusion = {{1, 2}, ProjectionKind::Linear, FusionKind::Sum};
  const Autoencoder<double> m(c);
  const MaskPlan plan = mask_from_flags(2, 2, {0, 1, 0, 0});
  nn::Graph<double> g;
  const auto feats = encode_stages(m, g, visible_fine_patches(m, random_image(64, 64, 6), plan));
  // Average every stage over its stage-3 cell by scanning positions directly.
  const std::vector<int>& p3 = feats.positions[2];
  nn::Matrix<double> expect = nn::Matrix<double>::Zero(Eigen::Index(p3.size()), 16);
  for (int s = 0; s < 3; ++s) {
    const int grid = feats.grid[s], factor = grid / feats.grid[2];
    nn::Matrix<double> pooled = nn::Matrix<double>::Zero(Eigen::Index(p3.size()), feats.x[s].cols());
    for (std::size_t r = 0; r < feats.positions[s].size(); ++r) {
      const int p = feats.positions[s][r];
      const int cell = (p / grid / factor) * feats.grid[2] + (p % grid) / factor;
      const auto row = std::find(p3.begin(), p3.end(), cell) - p3.begin();
      pooled.row(row) += feats.x[s].value().row(Eigen::Index(r)) / double(factor * factor);
    }
    const auto& lin = m.fusion.proj[s == 2 ? 0 : std::size_t(s + 1)].linear;
    EXPECT_EQ(m.fusion.stages[s == 2 ? 0 : std::size_t(s + 1)], s + 1);
    expect += (pooled * lin.weight->value.transpose()).rowwise() + lin.bias->value.row(0);
  }
  EXPECT_LT(max_abs(fuse_multiscale(m, feats).value(), expect), 1e-12);
}

TEST(Decoder, PredictionsDifferAcrossMaskedUnits) {
  const Autoencoder<double> m(toy(4));
  const MaskPlan plan = sample_mask(4, 4, 0.75, 8);
  nn::Graph<double> g;
  const auto feats = encode_stages(m, g, visible_fine_patches(m, random_image(64, 64, 7), plan));
  const auto rec = decode_reconstruct(m, fuse_multiscale(m, feats), feats, plan);
  ASSERT_EQ(rec.pred.rows(), 12);
  for (Eigen::Index r = 1; r < rec.pred.rows(); ++r) {
    EXPECT_GT((rec.pred.value().row(r) - rec.pred.value().row(0)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Loss, IgnoresVisibleTargetPixels) {
  const Autoencoder<double> m(toy());
  const MaskPlan plan = mask_from_flags(2, 2, {1, 0, 0, 0});
  Image img = random_image(64, 64, 8);
  const double base = forward_pretrain(m, img, plan);
  EXPECT_GE(base, 0.0);
  // The loss only reads the target at the masked unit.
  nn::Graph<double> g;
  const auto feats = encode_stages(m, g, visible_fine_patches(m, img, plan));
  const auto rec = decode_reconstruct(m, fuse_multiscale(m, feats), feats, plan);
  PatchSet<double> units = patchify(img, 32);
  const double direct = (rec.pred.value() - units.tokens.row(0)).squaredNorm() / double(rec.pred.value().size());
  EXPECT_NEAR(direct, base, 1e-12);
  units.tokens.bottomRows(3).array() += 0.5;
  EXPECT_EQ(masked_mse(PatchSet<double>{rec.pred.value(), {0}}, split_visible(units, plan).masked_target, plan),
            masked_mse(PatchSet<double>{rec.pred.value(), {0}},
                       split_visible(patchify(img, 32), plan).masked_target, plan));
}

TEST(Gradients, FiniteDifferencesAgree) {
  Autoencoder<double> m(toy());
  const auto res = qptv2::test::gradient_check(m, random_image(64, 64, 9), mask_from_flags(2, 2, {0, 1, 1, 0}));
  EXPECT_GE(res.entries.size(), 20u);
  for (const char* grp : {"encoder", "projection", "fusion", "decoder"}) EXPECT_TRUE(res.groups.count(grp)) << grp;
  for (const auto& e : res.entries) {
    EXPECT_LE(e.rel_error, 1e-4) << e.name << "[" << e.index << "] " << e.analytic << " vs " << e.numeric;
  }
}

TEST(Gradients, FiniteDifferencesMlpProjectionSum) {
  AutoencoderConfig c = toy();
  c.fusion = {{1, 2}, ProjectionKind::Mlp, FusionKind::Sum};
  Autoencoder<double> m(c);
  const auto res = qptv2::test::gradient_check(m, random_image(64, 64, 10), mask_from_flags(2, 2, {1, 0, 0, 1}));
  EXPECT_GE(res.entries.size(), 20u);
  EXPECT_LE(res.max_rel_error, 1e-4);
}

TEST(Finetune, OnlyEncoderReceivesGradients) {
  Autoencoder<double> m(toy());
  m.params().zero_grad();
  nn::Graph<double> g;
  const auto f = finetune_features(m, g, random_image(64, 64, 11));
  EXPECT_EQ(f.rows(), 1);
  EXPECT_EQ(f.cols(), 32);
  Rng rng(4);
  nn::Matrix<double> w(1, 32);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = uniform(rng, -1.0, 1.0);
  g.backward(nn::mean_all(nn::mul_const(f, w)));
  double enc = 0.0;
  for (const auto& p : m.params()) {
    if (p.name.rfind("encoder.", 0) == 0) {
      enc += p.grad.cwiseAbs().sum();
    } else {
      EXPECT_EQ(p.grad.cwiseAbs().maxCoeff(), 0.0) << p.name;
    }
  }
  EXPECT_GT(enc, 0.0);
}

TEST(Finetune, DeterministicFeatures) {
  const Autoencoder<double> m(toy());
  const Image img = random_image(64, 64, 12);
  EXPECT_EQ(forward_finetune(m, img), forward_finetune(m, img));
  EXPECT_TRUE(forward_finetune(m, img).allFinite());
}

TEST(Inflate, SingleFrameIsIdentity) {
  Rng rng(1);
  nn::Matrix<double> w = nn::xavier_uniform<double>(5, 12, rng);
  EXPECT_EQ(inflate_temporal(w, 1), w);
  EXPECT_THROW(inflate_temporal(w, 0), ParameterError);
}

TEST(Inflate, StaticClipMatchesImageEmbedding) {
  Rng rng(2);
  const nn::Matrix<double> w = nn::xavier_uniform<double>(6, 4 * 4 * 3, rng);
  const Image img = random_image(8, 8, 13);
  for (int t : {2, 3, 4}) {
    const std::vector<Image> clip(std::size_t(t), img);
    const nn::Matrix<double> video = tubelet_tokens(clip, 0, t, 4) * inflate_temporal(w, t).transpose();
    const nn::Matrix<double> image = patchify(img, 4).tokens * w.transpose();
    EXPECT_LT(max_abs(video, image), 1e-12);
  }
}

TEST(Inflate, MovingClipMatchesExplicitSum) {
  Rng rng(3);
  const nn::Matrix<double> w = nn::xavier_uniform<double>(3, 2 * 2 * 3, rng);
  const int t = 3;
  std::vector<Image> clip;
  for (int i = 0; i < t; ++i) clip.push_back(random_image(4, 4, 20 + std::uint64_t(i)));
  const nn::Matrix<double> got = tubelet_tokens(clip, 0, t, 2) * inflate_temporal(w, t).transpose();
  for (int pos = 0; pos < 4; ++pos) {
    const int y0 = (pos / 2) * 2, x0 = (pos % 2) * 2;
    for (int o = 0; o < 3; ++o) {
      double s = 0.0;
      for (int f = 0; f < t; ++f) {
        for (int py = 0; py < 2; ++py) {
          for (int px = 0; px < 2; ++px) {
            for (int c = 0; c < 3; ++c) s += w(o, (py * 2 + px) * 3 + c) * clip[f](y0 + py, x0 + px, c) / t;
          }
        }
      }
      EXPECT_NEAR(got(pos, o), s, 1e-12);
    }
  }
}

TEST(Inflate, StaticVideoFeaturesMatchImageFeatures) {
  Autoencoder<double> m(toy());
  nn::Parameter<double> embed3d;
  embed3d.value = inflate_temporal(m.encoder.patch_embed.weight->value, 2);
  embed3d.zero_grad();
  const Image img = random_image(64, 64, 14);
  nn::Graph<double> g;
  const auto v = video_features(m, g, embed3d, std::vector<Image>(4, img), 2);
  EXPECT_LT((v.value().row(0).transpose() - forward_finetune(m, img)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_THROW(video_features(m, g, embed3d, std::vector<Image>(3, img), 2), ParameterError);
}
