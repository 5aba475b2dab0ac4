#include "qptv2/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "qptv2/random.hpp"

namespace qptv2 {

template <typename Scalar>
int PatchSet<Scalar>::patch_side() const {
  const auto per_channel = tokens.cols() / 3;
  const int side = static_cast<int>(std::lround(std::sqrt(double(per_channel))));
  if (side * side * 3 != tokens.cols()) throw ParameterError("token width is not patch^2 * 3");
  return side;
}

int MaskPlan::masked_count() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::vector<int> MaskPlan::masked_indices() const {
  std::vector<int> out;
  for (int i = 0; i < grid_size(); ++i)
    if (mask[i]) out.push_back(i);
  return out;
}

std::vector<int> MaskPlan::visible_indices() const {
  std::vector<int> out;
  for (int i = 0; i < grid_size(); ++i)
    if (!mask[i]) out.push_back(i);
  return out;
}

template <typename Scalar>
PatchSet<Scalar> patchify(const BasicImage<Scalar>& img, int patch) {
  if (patch <= 0 || img.height() % patch != 0 || img.width() % patch != 0) {
    throw ParameterError("patchify: image " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                         " is not divisible by patch " + std::to_string(patch));
  }
  const int gh = img.height() / patch, gw = img.width() / patch;
  PatchSet<Scalar> out;
  out.tokens.resize(gh * gw, patch * patch * 3);
  out.positions.resize(gh * gw);
  for (int gy = 0; gy < gh; ++gy) {
    for (int gx = 0; gx < gw; ++gx) {
      const int idx = gy * gw + gx;
      out.positions[idx] = idx;
      int k = 0;
      for (int py = 0; py < patch; ++py)
        for (int px = 0; px < patch; ++px)
          for (int c = 0; c < 3; ++c) out.tokens(idx, k++) = img(gy * patch + py, gx * patch + px, c);
    }
  }
  return out;
}

template <typename Scalar>
BasicImage<Scalar> unpatchify(const PatchSet<Scalar>& patches, int height, int width, ColorSpace space) {
  const int patch = patches.patch_side();
  if (height % patch != 0 || width % patch != 0) throw ParameterError("unpatchify: dims not divisible by patch");
  const int gh = height / patch, gw = width / patch;
  if (patches.size() != Eigen::Index(gh) * gw || patches.positions.size() != std::size_t(patches.size())) {
    throw ParameterError("unpatchify: expected " + std::to_string(gh * gw) + " patches, got " +
                         std::to_string(patches.size()));
  }
  std::vector<char> seen(gh * gw, 0);
  BasicImage<Scalar> img(height, width, space);
  for (Eigen::Index row = 0; row < patches.size(); ++row) {
    const int idx = patches.positions[row];
    if (idx < 0 || idx >= gh * gw || seen[idx]) throw ParameterError("unpatchify: missing or duplicate positions");
    seen[idx] = 1;
    const int gy = idx / gw, gx = idx % gw;
    int k = 0;
    for (int py = 0; py < patch; ++py)
      for (int px = 0; px < patch; ++px)
        for (int c = 0; c < 3; ++c) img(gy * patch + py, gx * patch + px, c) = patches.tokens(row, k++);
  }
  return img;
}

MaskPlan sample_mask(int grid_h, int grid_w, double ratio, std::uint64_t seed, int patch) {
  if (grid_h < 1 || grid_w < 1) throw ParameterError("sample_mask: grid must be at least 1x1");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("sample_mask: ratio must lie in (0, 1)");
  const int n = grid_h * grid_w;
  const int k = static_cast<int>(std::lround(ratio * n));
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  MaskPlan plan;
  plan.grid_h = grid_h;
  plan.grid_w = grid_w;
  plan.patch = patch;
  plan.ratio = ratio;
  plan.seed = seed;
  plan.mask.assign(n, 0);
  for (int i = 0; i < k; ++i) plan.mask[idx[i]] = 1;
  return plan;
}

MaskPlan mask_from_flags(int grid_h, int grid_w, std::vector<std::uint8_t> flags, int patch) {
  if (flags.size() != std::size_t(grid_h) * grid_w) throw ParameterError("mask_from_flags: size mismatch");
  MaskPlan plan;
  plan.grid_h = grid_h;
  plan.grid_w = grid_w;
  plan.patch = patch;
  plan.mask = std::move(flags);
  plan.ratio = double(plan.masked_count()) / plan.grid_size();
  return plan;
}

template <typename Scalar>
PatchSet<Scalar> select_positions(const PatchSet<Scalar>& patches, const std::vector<int>& keep) {
  std::unordered_map<int, Eigen::Index> row_of;
  for (Eigen::Index r = 0; r < patches.size(); ++r) row_of[patches.positions[r]] = r;
  std::vector<int> sorted = keep;
  std::sort(sorted.begin(), sorted.end());
  PatchSet<Scalar> out;
  out.tokens.resize(static_cast<Eigen::Index>(sorted.size()), patches.tokens.cols());
  out.positions = sorted;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto it = row_of.find(sorted[i]);
    if (it == row_of.end()) throw ParameterError("position " + std::to_string(sorted[i]) + " not in patch set");
    out.tokens.row(static_cast<Eigen::Index>(i)) = patches.tokens.row(it->second);
  }
  return out;
}

template <typename Scalar>
VisibleSplit<Scalar> split_visible(const PatchSet<Scalar>& patches, const MaskPlan& plan) {
  if (patches.size() != plan.grid_size() || std::size_t(plan.grid_size()) != plan.mask.size()) {
    throw ParameterError("split_visible: " + std::to_string(patches.size()) + " patches for a grid of " +
                         std::to_string(plan.grid_size()));
  }
  return {select_positions(patches, plan.visible_indices()), select_positions(patches, plan.masked_indices())};
}

template <typename Scalar>
Scalar masked_mse(const PatchSet<Scalar>& pred, const PatchSet<Scalar>& target, const MaskPlan& plan) {
  const std::vector<int> masked = plan.masked_indices();
  auto sorted_positions = [](std::vector<int> p) {
    std::sort(p.begin(), p.end());
    return p;
  };
  if (sorted_positions(pred.positions) != masked || sorted_positions(target.positions) != masked) {
    throw ParameterError("masked_mse: prediction/target positions do not match the masked set");
  }
  if (pred.tokens.cols() != target.tokens.cols()) throw ParameterError("masked_mse: token width mismatch");
  const PatchSet<Scalar> p = select_positions(pred, masked);
  const PatchSet<Scalar> t = select_positions(target, masked);
  return (p.tokens - t.tokens).squaredNorm() / Scalar(p.tokens.size());
}

template <typename Scalar>
Scalar masked_mse_dense(const PatchSet<Scalar>& pred, const PatchSet<Scalar>& target, const MaskPlan& plan) {
  const std::vector<int> masked = plan.masked_indices();
  return masked_mse(select_positions(pred, masked), select_positions(target, masked), plan);
}

template <typename Scalar>
PatchSet<Scalar> normalize_patches(const PatchSet<Scalar>& patches, Scalar eps) {
  PatchSet<Scalar> out = patches;
  for (Eigen::Index r = 0; r < out.size(); ++r) {
    auto row = out.tokens.row(r);
    const Scalar mean = row.mean();
    const Scalar var = (row.array() - mean).square().mean();
    row = (row.array() - mean) / std::sqrt(var + eps);
  }
  return out;
}

#define QPTV2_INSTANTIATE_MASKING(T)                                                                   \
  template struct PatchSet<T>;                                                                         \
  template PatchSet<T> patchify<T>(const BasicImage<T>&, int);                                         \
  template BasicImage<T> unpatchify<T>(const PatchSet<T>&, int, int, ColorSpace);                      \
  template PatchSet<T> select_positions<T>(const PatchSet<T>&, const std::vector<int>&);               \
  template VisibleSplit<T> split_visible<T>(const PatchSet<T>&, const MaskPlan&);                      \
  template T masked_mse<T>(const PatchSet<T>&, const PatchSet<T>&, const MaskPlan&);                   \
  template T masked_mse_dense<T>(const PatchSet<T>&, const PatchSet<T>&, const MaskPlan&);             \
  template PatchSet<T> normalize_patches<T>(const PatchSet<T>&, T);

QPTV2_INSTANTIATE_MASKING(float)
QPTV2_INSTANTIATE_MASKING(double)

#undef QPTV2_INSTANTIATE_MASKING

}  // namespace qptv2
