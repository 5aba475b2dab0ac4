#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "qptv2/image.hpp"
#include "qptv2/layers.hpp"
#include "qptv2/masking.hpp"

namespace qptv2 {

struct EncoderConfig {
  int patch = 8;  // stage-1 patch side in pixels
  std::array<int, 3> stage_dims{32, 48, 96};
  std::array<int, 3> stage_depths{1, 1, 2};
  int heads = 4;  // stage-3 attention heads
  int input_size = 64;
  int mlp_ratio = 2;

  int fine_grid() const { return input_size / patch; }
  // Masking happens on the stage-3 grid: one unit covers 4x4 stage-1 patches.
  int unit() const { return 4 * patch; }
  int unit_grid() const { return input_size / unit(); }

  void validate() const;
};

enum class ProjectionKind { Linear, Mlp };
enum class FusionKind { WeightedPool, Sum };

std::string_view to_string(ProjectionKind k);
std::string_view to_string(FusionKind k);
ProjectionKind parse_projection_kind(std::string_view s);
FusionKind parse_fusion_kind(std::string_view s);

struct FusionConfig {
  std::vector<int> fuse_stages{1};  // subset of {1, 2}; stage 3 always reaches the decoder
  ProjectionKind projection = ProjectionKind::Linear;
  FusionKind fusion = FusionKind::WeightedPool;

  bool enabled() const { return !fuse_stages.empty(); }
  // Stages entering the fusion layer, stage 3 first.
  std::vector<int> routed_stages() const;
  void validate() const;
};

struct DecoderConfig {
  int dim = 32;
  int depth = 1;
  int heads = 4;
  int mlp_ratio = 2;

  void validate() const;
};

struct AutoencoderConfig {
  EncoderConfig encoder;
  FusionConfig fusion;
  DecoderConfig decoder;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const AutoencoderConfig& c);
AutoencoderConfig autoencoder_config_from_json(const nlohmann::json& j);

template <typename Scalar>
struct Projection {
  ProjectionKind kind = ProjectionKind::Linear;
  nn::Linear<Scalar> linear;
  nn::Mlp<Scalar> mlp;

  nn::Var<Scalar> operator()(nn::Var<Scalar> x) const {
    return kind == ProjectionKind::Linear ? linear(x) : mlp(x);
  }
};

// Hierarchical masked autoencoder. Parameter names are canonical and stable:
//   encoder.*            patch embedding, stage blocks, merges, final norm
//   fusion.proj<s>.*     per-stage projection into the decoder width
//   fusion.logits        stage weights (weighted pooling only)
//   decoder.*            embedding (fusion disabled), mask token, blocks, head
template <typename Scalar>
class Autoencoder {
 public:
  explicit Autoencoder(const AutoencoderConfig& config);

  Autoencoder(Autoencoder&&) noexcept = default;
  Autoencoder& operator=(Autoencoder&&) noexcept = default;

  const AutoencoderConfig& config() const { return config_; }
  nn::ParameterStore<Scalar>& params() { return *store_; }
  const nn::ParameterStore<Scalar>& params() const { return *store_; }

  // Parameter counts grouped into encoder / projection / fusion / decoder.
  std::map<std::string, std::int64_t> parameter_report() const;

  Autoencoder clone() const;

  struct Encoder {
    nn::Linear<Scalar> patch_embed;
    std::vector<nn::MlpBlock<Scalar>> stage1, stage2;
    nn::PatchMerge<Scalar> merge1, merge2;
    std::vector<nn::AttentionBlock<Scalar>> stage3;
    nn::LayerNorm<Scalar> norm;
    nn::Matrix<Scalar> pos_embed;  // fine grid, stage-1 width
  } encoder;

  struct Fusion {
    std::vector<int> stages;  // routed stages, stage 3 first
    std::vector<Projection<Scalar>> proj;
    nn::Parameter<Scalar>* logits = nullptr;
  } fusion;

  struct Decoder {
    nn::Linear<Scalar> embed;  // only when fusion is disabled
    nn::Parameter<Scalar>* mask_token = nullptr;
    std::vector<nn::AttentionBlock<Scalar>> blocks;
    nn::LayerNorm<Scalar> norm;
    nn::Linear<Scalar> pred;
    nn::Matrix<Scalar> pos_embed;  // unit grid, decoder width
  } decoder;

 private:
  AutoencoderConfig config_;
  std::unique_ptr<nn::ParameterStore<Scalar>> store_;
};

template <typename Scalar>
Autoencoder<Scalar> build_autoencoder(const EncoderConfig& enc, const FusionConfig& fus, const DecoderConfig& dec,
                                      std::uint64_t seed) {
  return Autoencoder<Scalar>(AutoencoderConfig{enc, fus, dec, seed});
}

template <typename Scalar>
struct StageFeatures {
  std::array<nn::Var<Scalar>, 3> x;
  std::array<std::vector<int>, 3> positions;  // ascending grid indices per stage
  std::array<int, 3> grid{};                  // grid side per stage
};

template <typename Scalar>
struct Reconstruction {
  nn::Var<Scalar> pred;        // one row per masked unit
  std::vector<int> positions;  // ascending unit indices
};

struct PretrainOptions {
  bool norm_pix_loss = false;
};

// ---------------------------------------------------------------------------

namespace detail {

// Groups rows of a stage whose positions lie on a `grid` x `grid` lattice into
// the factor x factor cells of the coarser lattice. Rows inside a group are
// ordered row-major within the cell. Throws if a touched cell is incomplete.
struct CellGroups {
  std::vector<std::vector<int>> groups;
  std::vector<int> coarse_positions;
};

inline CellGroups group_cells(const std::vector<int>& positions, int grid, int factor) {
  std::unordered_map<int, int> row_of;
  for (std::size_t r = 0; r < positions.size(); ++r) row_of[positions[r]] = static_cast<int>(r);
  const int coarse = grid / factor;
  std::vector<int> cells;
  for (int p : positions) cells.push_back((p / grid / factor) * coarse + (p % grid) / factor);
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  CellGroups out;
  out.coarse_positions = cells;
  for (int c : cells) {
    const int cy = c / coarse, cx = c % coarse;
    std::vector<int> members;
    for (int dy = 0; dy < factor; ++dy) {
      for (int dx = 0; dx < factor; ++dx) {
        const int p = (cy * factor + dy) * grid + cx * factor + dx;
        const auto it = row_of.find(p);
        if (it == row_of.end()) {
          throw ParameterError("visible tokens do not cover merge cell " + std::to_string(c) +
                               " completely (missing position " + std::to_string(p) + ")");
        }
        members.push_back(it->second);
      }
    }
    out.groups.push_back(std::move(members));
  }
  return out;
}

}  // namespace detail

template <typename Scalar>
Autoencoder<Scalar>::Autoencoder(const AutoencoderConfig& config)
    : config_(config), store_(std::make_unique<nn::ParameterStore<Scalar>>()) {
  config_.validate();
  const EncoderConfig& e = config_.encoder;
  const FusionConfig& f = config_.fusion;
  const DecoderConfig& d = config_.decoder;
  Rng rng(config_.seed);
  auto& s = *store_;

  encoder.patch_embed = nn::Linear<Scalar>::create(s, "encoder.patch_embed", e.patch * e.patch * 3, e.stage_dims[0], rng);
  for (int i = 0; i < e.stage_depths[0]; ++i) {
    encoder.stage1.push_back(
        nn::MlpBlock<Scalar>::create(s, "encoder.stage1." + std::to_string(i), e.stage_dims[0], e.mlp_ratio, rng));
  }
  encoder.merge1 = nn::PatchMerge<Scalar>::create(s, "encoder.merge1", e.stage_dims[0], e.stage_dims[1], rng);
  for (int i = 0; i < e.stage_depths[1]; ++i) {
    encoder.stage2.push_back(
        nn::MlpBlock<Scalar>::create(s, "encoder.stage2." + std::to_string(i), e.stage_dims[1], e.mlp_ratio, rng));
  }
  encoder.merge2 = nn::PatchMerge<Scalar>::create(s, "encoder.merge2", e.stage_dims[1], e.stage_dims[2], rng);
  for (int i = 0; i < e.stage_depths[2]; ++i) {
    encoder.stage3.push_back(nn::AttentionBlock<Scalar>::create(s, "encoder.stage3." + std::to_string(i),
                                                                e.stage_dims[2], e.heads, e.mlp_ratio, rng));
  }
  encoder.norm = nn::LayerNorm<Scalar>::create(s, "encoder.norm", e.stage_dims[2]);
  encoder.pos_embed = nn::sincos_embedding_2d<Scalar>(e.fine_grid(), e.fine_grid(), e.stage_dims[0]);

  if (f.enabled()) {
    fusion.stages = f.routed_stages();
    for (int st : fusion.stages) {
      Projection<Scalar> p;
      p.kind = f.projection;
      const std::string name = "fusion.proj" + std::to_string(st);
      if (f.projection == ProjectionKind::Linear) {
        p.linear = nn::Linear<Scalar>::create(s, name, e.stage_dims[st - 1], d.dim, rng);
      } else {
        p.mlp = nn::Mlp<Scalar>::create(s, name, e.stage_dims[st - 1], d.dim, d.dim, rng);
      }
      fusion.proj.push_back(p);
    }
    if (f.fusion == FusionKind::WeightedPool) {
      fusion.logits = &s.add("fusion.logits", nn::Matrix<Scalar>::Zero(1, static_cast<int>(fusion.stages.size())), false);
    }
  } else {
    decoder.embed = nn::Linear<Scalar>::create(s, "decoder.embed", e.stage_dims[2], d.dim, rng);
  }

  decoder.mask_token = &s.add("decoder.mask_token", nn::normal_init<Scalar>(1, d.dim, 0.02, rng), false);
  for (int i = 0; i < d.depth; ++i) {
    decoder.blocks.push_back(
        nn::AttentionBlock<Scalar>::create(s, "decoder.blocks." + std::to_string(i), d.dim, d.heads, d.mlp_ratio, rng));
  }
  decoder.norm = nn::LayerNorm<Scalar>::create(s, "decoder.norm", d.dim);
  decoder.pred = nn::Linear<Scalar>::create(s, "decoder.pred", d.dim, e.unit() * e.unit() * 3, rng);

  // Decoder positions: the fine-grid embedding averaged over each unit.
  const nn::Matrix<Scalar> fine = nn::sincos_embedding_2d<Scalar>(e.fine_grid(), e.fine_grid(), d.dim);
  const int ug = e.unit_grid();
  decoder.pos_embed = nn::Matrix<Scalar>::Zero(ug * ug, d.dim);
  for (int p = 0; p < e.fine_grid() * e.fine_grid(); ++p) {
    const int u = (p / e.fine_grid() / 4) * ug + (p % e.fine_grid()) / 4;
    decoder.pos_embed.row(u) += fine.row(p) / Scalar(16);
  }
}

template <typename Scalar>
std::map<std::string, std::int64_t> Autoencoder<Scalar>::parameter_report() const {
  return {{"encoder", store_->count("encoder.")},
          {"projection", store_->count("fusion.proj")},
          {"fusion", store_->count("fusion.logits")},
          {"decoder", store_->count("decoder.")},
          {"total", store_->count()}};
}

template <typename Scalar>
Autoencoder<Scalar> Autoencoder<Scalar>::clone() const {
  Autoencoder<Scalar> copy(config_);
  auto src = store_->begin();
  for (auto& p : copy.params()) (p.value = (src++)->value);
  return copy;
}

// Runs the encoder on already-embedded stage-1 tokens (rows ordered by
// ascending fine-grid position).
template <typename Scalar>
StageFeatures<Scalar> encode_embedded(const Autoencoder<Scalar>& model, nn::Var<Scalar> x,
                                      const std::vector<int>& fine_positions) {
  const EncoderConfig& e = model.config().encoder;
  StageFeatures<Scalar> f;
  f.grid = {e.fine_grid(), e.fine_grid() / 2, e.fine_grid() / 4};

  for (const auto& blk : model.encoder.stage1) x = blk(x);
  f.x[0] = x;
  f.positions[0] = fine_positions;

  detail::CellGroups g1 = detail::group_cells(fine_positions, f.grid[0], 2);
  x = model.encoder.merge1(x, std::move(g1.groups));
  for (const auto& blk : model.encoder.stage2) x = blk(x);
  f.x[1] = x;
  f.positions[1] = std::move(g1.coarse_positions);

  detail::CellGroups g2 = detail::group_cells(f.positions[1], f.grid[1], 2);
  x = model.encoder.merge2(x, std::move(g2.groups));
  for (const auto& blk : model.encoder.stage3) x = blk(x);
  f.x[2] = model.encoder.norm(x);
  f.positions[2] = std::move(g2.coarse_positions);
  return f;
}

namespace detail {

template <typename Scalar>
void check_visible(const Autoencoder<Scalar>& model, const PatchSet<Scalar>& visible) {
  const EncoderConfig& e = model.config().encoder;
  const int n_fine = e.fine_grid() * e.fine_grid();
  if (visible.tokens.cols() != e.patch * e.patch * 3) {
    throw ParameterError("encode_stages: token width " + std::to_string(visible.tokens.cols()) +
                         " does not match patch " + std::to_string(e.patch));
  }
  if (visible.positions.size() != std::size_t(visible.tokens.rows()) || visible.positions.empty()) {
    throw ParameterError("encode_stages: token/position count mismatch");
  }
  std::vector<char> seen(n_fine, 0);
  for (int p : visible.positions) {
    if (p < 0 || p >= n_fine || seen[p]) throw ParameterError("encode_stages: invalid or duplicate position");
    seen[p] = 1;
  }
}

}  // namespace detail

template <typename Scalar>
StageFeatures<Scalar> encode_stages(const Autoencoder<Scalar>& model, nn::Graph<Scalar>& g,
                                    const PatchSet<Scalar>& visible) {
  detail::check_visible(model, visible);
  std::vector<int> order(visible.positions.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return visible.positions[a] < visible.positions[b]; });
  nn::Matrix<Scalar> tokens(visible.tokens.rows(), visible.tokens.cols());
  nn::Matrix<Scalar> pos(visible.tokens.rows(), model.encoder.pos_embed.cols());
  std::vector<int> sorted_positions(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    tokens.row(r) = visible.tokens.row(order[i]);
    sorted_positions[i] = visible.positions[order[i]];
    pos.row(r) = model.encoder.pos_embed.row(sorted_positions[i]);
  }
  nn::Var<Scalar> x = nn::add_const(model.encoder.patch_embed(g.constant(std::move(tokens))), pos);
  return encode_embedded(model, x, sorted_positions);
}

// Pools every routed stage onto the stage-3 grid, projects it to the decoder
// width and combines the results. Without fused stages this is the plain
// decoder embedding of stage 3.
template <typename Scalar>
nn::Var<Scalar> fuse_multiscale(const Autoencoder<Scalar>& model, const StageFeatures<Scalar>& feats) {
  if (!model.config().fusion.enabled()) return model.decoder.embed(feats.x[2]);
  std::vector<nn::Var<Scalar>> projected;
  for (std::size_t i = 0; i < model.fusion.stages.size(); ++i) {
    const int st = model.fusion.stages[i] - 1;
    nn::Var<Scalar> pooled = feats.x[st];
    if (st != 2) {
      const int factor = st == 0 ? 4 : 2;
      detail::CellGroups cells = detail::group_cells(feats.positions[st], feats.grid[st], factor);
      if (cells.coarse_positions != feats.positions[2]) {
        throw ParameterError("fuse_multiscale: stage grids are inconsistent");
      }
      pooled = nn::mean_groups(pooled, std::move(cells.groups));
    }
    projected.push_back(model.fusion.proj[i](pooled));
  }
  nn::Graph<Scalar>& g = *feats.x[2].graph;
  if (model.config().fusion.fusion == FusionKind::Sum) {
    nn::Var<Scalar> y = projected[0];
    for (std::size_t i = 1; i < projected.size(); ++i) y = y + projected[i];
    return y;
  }
  const nn::Var<Scalar> w = nn::softmax_row(g.param(*model.fusion.logits));
  nn::Var<Scalar> y = nn::scale_by(projected[0], w, 0);
  for (std::size_t i = 1; i < projected.size(); ++i) y = y + nn::scale_by(projected[i], w, static_cast<int>(i));
  return y;
}

// Places Y at the visible units and the shared mask token at every masked
// unit, adds positions, decodes, and returns pixel predictions for the masked
// units only.
template <typename Scalar>
Reconstruction<Scalar> decode_reconstruct(const Autoencoder<Scalar>& model, nn::Var<Scalar> fused,
                                          const StageFeatures<Scalar>& feats, const MaskPlan& plan) {
  const EncoderConfig& e = model.config().encoder;
  if (plan.grid_h != e.unit_grid() || plan.grid_w != e.unit_grid()) {
    throw ParameterError("decode_reconstruct: mask grid does not match the unit grid");
  }
  if (plan.visible_indices() != feats.positions[2]) {
    throw ParameterError("decode_reconstruct: visible units disagree with the mask plan");
  }
  nn::Graph<Scalar>& g = *fused.graph;
  const std::vector<int> masked = plan.masked_indices();
  const auto n_vis = static_cast<int>(feats.positions[2].size());
  std::vector<int> order(plan.grid_size());
  int vi = 0, mi = 0;
  for (int u = 0; u < plan.grid_size(); ++u) order[u] = plan.is_masked(u) ? n_vis + mi++ : vi++;

  nn::Var<Scalar> seq = fused;
  if (!masked.empty()) {
    seq = nn::vconcat(fused, nn::broadcast_rows(g.param(*model.decoder.mask_token), Eigen::Index(masked.size())));
  }
  nn::Var<Scalar> x = nn::add_const(nn::gather_rows(seq, order), model.decoder.pos_embed);
  for (const auto& blk : model.decoder.blocks) x = blk(x);
  x = model.decoder.pred(model.decoder.norm(x));
  return {nn::gather_rows(x, masked), masked};
}

template <typename Scalar>
PatchSet<Scalar> visible_fine_patches(const Autoencoder<Scalar>& model, const BasicImage<Scalar>& img,
                                      const MaskPlan& plan) {
  const EncoderConfig& e = model.config().encoder;
  const PatchSet<Scalar> fine = patchify(img, e.patch);
  const int fg = e.fine_grid(), ug = e.unit_grid();
  std::vector<int> keep;
  for (int p = 0; p < fg * fg; ++p) {
    const int u = (p / fg / 4) * ug + (p % fg) / 4;
    if (!plan.is_masked(u)) keep.push_back(p);
  }
  return select_positions(fine, keep);
}

// Full pretraining objective as a graph node: patchify, split, encode, fuse,
// decode, and mean squared error over the masked units.
template <typename Scalar>
nn::Var<Scalar> pretrain_loss(const Autoencoder<Scalar>& model, nn::Graph<Scalar>& g, const BasicImage<Scalar>& img,
                              const MaskPlan& plan, const PretrainOptions& opts = {}) {
  const EncoderConfig& e = model.config().encoder;
  if (img.height() != e.input_size || img.width() != e.input_size) {
    throw ParameterError("forward_pretrain: image must be " + std::to_string(e.input_size) + " square");
  }
  const StageFeatures<Scalar> feats = encode_stages(model, g, visible_fine_patches(model, img, plan));
  const nn::Var<Scalar> fused = fuse_multiscale(model, feats);
  const Reconstruction<Scalar> rec = decode_reconstruct(model, fused, feats, plan);
  PatchSet<Scalar> target = split_visible(patchify(img, e.unit()), plan).masked_target;
  if (opts.norm_pix_loss) target = normalize_patches(target);
  return nn::mse(rec.pred, nn::Matrix<Scalar>(target.tokens));
}

template <typename Scalar>
Scalar forward_pretrain(const Autoencoder<Scalar>& model, const BasicImage<Scalar>& img, const MaskPlan& plan,
                        const PretrainOptions& opts = {}) {
  nn::Graph<Scalar> g;
  return pretrain_loss(model, g, img, plan, opts).scalar();
}

// Encoder-only path over every patch, averaged over stage-3 tokens (1 x d3).
template <typename Scalar>
nn::Var<Scalar> finetune_features(const Autoencoder<Scalar>& model, nn::Graph<Scalar>& g,
                                  const BasicImage<Scalar>& img) {
  const EncoderConfig& e = model.config().encoder;
  if (img.height() != e.input_size || img.width() != e.input_size) {
    throw ParameterError("forward_finetune: image must be " + std::to_string(e.input_size) + " square");
  }
  return nn::mean_rows(encode_stages(model, g, patchify(img, e.patch)).x[2]);
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> forward_finetune(const Autoencoder<Scalar>& model,
                                                          const BasicImage<Scalar>& img) {
  nn::Graph<Scalar> g;
  return finetune_features(model, g, img).value().row(0).transpose();
}

// Replicates (out, p*p*3) patch-embedding weights over `t_patch` frames and
// divides by t_patch. Columns are laid out frame-major.
template <typename Scalar>
nn::Matrix<Scalar> inflate_temporal(const nn::Matrix<Scalar>& weights2d, int t_patch) {
  if (t_patch < 1) throw ParameterError("inflate_temporal: t_patch must be >= 1");
  nn::Matrix<Scalar> w3(weights2d.rows(), weights2d.cols() * t_patch);
  for (int t = 0; t < t_patch; ++t) w3.middleCols(t * weights2d.cols(), weights2d.cols()) = weights2d / Scalar(t_patch);
  return w3;
}

// Tubelet tokens of frames [first, first + t_patch): each row concatenates the
// per-frame patches at one fine-grid position.
template <typename Scalar>
nn::Matrix<Scalar> tubelet_tokens(const std::vector<BasicImage<Scalar>>& frames, int first, int t_patch, int patch) {
  const PatchSet<Scalar> p0 = patchify(frames.at(first), patch);
  nn::Matrix<Scalar> tokens(p0.tokens.rows(), p0.tokens.cols() * t_patch);
  tokens.leftCols(p0.tokens.cols()) = p0.tokens;
  for (int t = 1; t < t_patch; ++t) {
    tokens.middleCols(t * p0.tokens.cols(), p0.tokens.cols()) = patchify(frames.at(first + t), patch).tokens;
  }
  return tokens;
}

// Video features: tubelets embedded with inflated 3-D weights, each temporal
// slice encoded by the shared encoder, features averaged over slices.
template <typename Scalar>
nn::Var<Scalar> video_features(const Autoencoder<Scalar>& model, nn::Graph<Scalar>& g,
                               nn::Parameter<Scalar>& embed3d, const std::vector<BasicImage<Scalar>>& clip,
                               int t_patch) {
  const EncoderConfig& e = model.config().encoder;
  if (clip.empty() || clip.size() % std::size_t(t_patch) != 0) {
    throw ParameterError("video_features: clip length must be a positive multiple of t_patch");
  }
  std::vector<int> positions(std::size_t(e.fine_grid()) * e.fine_grid());
  std::iota(positions.begin(), positions.end(), 0);
  const nn::Matrix<Scalar> pos = model.encoder.pos_embed;
  nn::Var<Scalar> acc;
  const int slices = static_cast<int>(clip.size()) / t_patch;
  for (int s = 0; s < slices; ++s) {
    nn::Var<Scalar> tokens = g.constant(tubelet_tokens(clip, s * t_patch, t_patch, e.patch));
    nn::Var<Scalar> x = nn::linear(tokens, g.param(embed3d), g.param(*model.encoder.patch_embed.bias));
    x = nn::add_const(x, pos);
    nn::Var<Scalar> feat = nn::mean_rows(encode_embedded(model, x, positions).x[2]);
    acc = s == 0 ? feat : acc + feat;
  }
  return nn::scale(acc, Scalar(1) / Scalar(slices));
}

}  // namespace qptv2
