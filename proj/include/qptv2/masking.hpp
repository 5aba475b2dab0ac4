#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "qptv2/image.hpp"

namespace qptv2 {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Flattened patches, one per row, laid out (py, px, channel) within a row.
// positions[i] is the row-major grid index of row i.
template <typename Scalar>
struct PatchSet {
  RowMatrix<Scalar> tokens;
  std::vector<int> positions;

  Eigen::Index size() const { return tokens.rows(); }
  int patch_side() const;
};

struct MaskPlan {
  int grid_h = 0;
  int grid_w = 0;
  int patch = 0;  // side of one mask unit in pixels
  double ratio = 0.75;
  std::vector<std::uint8_t> mask;  // 1 = masked
  std::uint64_t seed = 0;

  int grid_size() const { return grid_h * grid_w; }
  int masked_count() const;
  std::vector<int> masked_indices() const;
  std::vector<int> visible_indices() const;
  bool is_masked(int index) const { return mask.at(static_cast<std::size_t>(index)) != 0; }
};

template <typename Scalar>
PatchSet<Scalar> patchify(const BasicImage<Scalar>& img, int patch);

template <typename Scalar>
BasicImage<Scalar> unpatchify(const PatchSet<Scalar>& patches, int height, int width,
                              ColorSpace space = ColorSpace::RGB);

// Uniform subset of round(ratio * N) masked units, deterministic per seed.
MaskPlan sample_mask(int grid_h, int grid_w, double ratio, std::uint64_t seed, int patch = 0);

// Builds a plan from an explicit mask, e.g. for hand-written test cases.
MaskPlan mask_from_flags(int grid_h, int grid_w, std::vector<std::uint8_t> flags, int patch = 0);

template <typename Scalar>
struct VisibleSplit {
  PatchSet<Scalar> visible;
  PatchSet<Scalar> masked_target;
};

template <typename Scalar>
VisibleSplit<Scalar> split_visible(const PatchSet<Scalar>& patches, const MaskPlan& plan);

// Rows of `patches` whose positions are in `keep`, in ascending position order.
template <typename Scalar>
PatchSet<Scalar> select_positions(const PatchSet<Scalar>& patches, const std::vector<int>& keep);

// Mean squared error over all elements of the masked patches. pred and target
// must both cover exactly the masked positions of the plan (in any order).
template <typename Scalar>
Scalar masked_mse(const PatchSet<Scalar>& pred, const PatchSet<Scalar>& target, const MaskPlan& plan);

// Same loss evaluated on full-grid patch sets: visible rows are ignored.
template <typename Scalar>
Scalar masked_mse_dense(const PatchSet<Scalar>& pred, const PatchSet<Scalar>& target, const MaskPlan& plan);

// Per-patch standardization of reconstruction targets (off by default).
template <typename Scalar>
PatchSet<Scalar> normalize_patches(const PatchSet<Scalar>& patches, Scalar eps = Scalar(1e-6));

}  // namespace qptv2
