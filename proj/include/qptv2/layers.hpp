#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "qptv2/autodiff.hpp"
#include "qptv2/random.hpp"

namespace qptv2::nn {

template <typename Scalar>
Matrix<Scalar> xavier_uniform(Eigen::Index out, Eigen::Index in, Rng& rng) {
  const double bound = std::sqrt(6.0 / double(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix<Scalar> w(out, in);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(dist(rng));
  return w;
}

template <typename Scalar>
Matrix<Scalar> normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
  return m;
}

template <typename Scalar>
struct Linear {
  Parameter<Scalar>* weight = nullptr;  // (out, in)
  Parameter<Scalar>* bias = nullptr;    // (1, out)

  static Linear create(ParameterStore<Scalar>& store, const std::string& name, int in, int out, Rng& rng) {
    Linear l;
    l.weight = &store.add(name + ".weight", xavier_uniform<Scalar>(out, in, rng));
    l.bias = &store.add(name + ".bias", Matrix<Scalar>::Zero(1, out), false);
    return l;
  }

  static std::int64_t param_count(std::int64_t in, std::int64_t out) { return in * out + out; }

  Var<Scalar> operator()(Var<Scalar> x) const {
    Graph<Scalar>& g = *x.graph;
    return linear(x, g.param(*weight), g.param(*bias));
  }
};

template <typename Scalar>
struct LayerNorm {
  Parameter<Scalar>* gamma = nullptr;
  Parameter<Scalar>* beta = nullptr;

  static LayerNorm create(ParameterStore<Scalar>& store, const std::string& name, int dim) {
    LayerNorm n;
    n.gamma = &store.add(name + ".weight", Matrix<Scalar>::Ones(1, dim), false);
    n.beta = &store.add(name + ".bias", Matrix<Scalar>::Zero(1, dim), false);
    return n;
  }

  static std::int64_t param_count(std::int64_t dim) { return 2 * dim; }

  Var<Scalar> operator()(Var<Scalar> x) const {
    Graph<Scalar>& g = *x.graph;
    return layer_norm(x, g.param(*gamma), g.param(*beta));
  }
};

// Linear - GELU - Linear.
template <typename Scalar>
struct Mlp {
  Linear<Scalar> fc1, fc2;

  static Mlp create(ParameterStore<Scalar>& store, const std::string& name, int in, int hidden, int out, Rng& rng) {
    return {Linear<Scalar>::create(store, name + ".fc1", in, hidden, rng),
            Linear<Scalar>::create(store, name + ".fc2", hidden, out, rng)};
  }

  static std::int64_t param_count(std::int64_t in, std::int64_t hidden, std::int64_t out) {
    return Linear<Scalar>::param_count(in, hidden) + Linear<Scalar>::param_count(hidden, out);
  }

  Var<Scalar> operator()(Var<Scalar> x) const { return fc2(gelu(fc1(x))); }
};

// Attention-free residual block: x + MLP(LN(x)).
template <typename Scalar>
struct MlpBlock {
  LayerNorm<Scalar> norm;
  Mlp<Scalar> mlp;

  static MlpBlock create(ParameterStore<Scalar>& store, const std::string& name, int dim, int mlp_ratio, Rng& rng) {
    return {LayerNorm<Scalar>::create(store, name + ".norm", dim),
            Mlp<Scalar>::create(store, name + ".mlp", dim, dim * mlp_ratio, dim, rng)};
  }

  static std::int64_t param_count(std::int64_t dim, std::int64_t mlp_ratio) {
    return LayerNorm<Scalar>::param_count(dim) + Mlp<Scalar>::param_count(dim, dim * mlp_ratio, dim);
  }

  Var<Scalar> operator()(Var<Scalar> x) const { return x + mlp(norm(x)); }
};

// Pre-norm transformer block with global multi-head self-attention.
template <typename Scalar>
struct AttentionBlock {
  LayerNorm<Scalar> norm1;
  Linear<Scalar> qkv;
  Linear<Scalar> proj;
  LayerNorm<Scalar> norm2;
  Mlp<Scalar> mlp;
  int heads = 1;

  static AttentionBlock create(ParameterStore<Scalar>& store, const std::string& name, int dim, int heads,
                               int mlp_ratio, Rng& rng) {
    AttentionBlock b;
    b.norm1 = LayerNorm<Scalar>::create(store, name + ".norm1", dim);
    b.qkv = Linear<Scalar>::create(store, name + ".attn.qkv", dim, 3 * dim, rng);
    b.proj = Linear<Scalar>::create(store, name + ".attn.proj", dim, dim, rng);
    b.norm2 = LayerNorm<Scalar>::create(store, name + ".norm2", dim);
    b.mlp = Mlp<Scalar>::create(store, name + ".mlp", dim, dim * mlp_ratio, dim, rng);
    b.heads = heads;
    return b;
  }

  static std::int64_t param_count(std::int64_t dim, std::int64_t mlp_ratio) {
    return 2 * LayerNorm<Scalar>::param_count(dim) + Linear<Scalar>::param_count(dim, 3 * dim) +
           Linear<Scalar>::param_count(dim, dim) + Mlp<Scalar>::param_count(dim, dim * mlp_ratio, dim);
  }

  Var<Scalar> operator()(Var<Scalar> x) const {
    Var<Scalar> h = x + proj(self_attention(qkv(norm1(x)), heads));
    return h + mlp(norm2(h));
  }
};

// 2x2 spatial merge: concatenate four neighbours, normalize, project.
template <typename Scalar>
struct PatchMerge {
  LayerNorm<Scalar> norm;
  Linear<Scalar> reduction;

  static PatchMerge create(ParameterStore<Scalar>& store, const std::string& name, int in_dim, int out_dim,
                           Rng& rng) {
    return {LayerNorm<Scalar>::create(store, name + ".norm", 4 * in_dim),
            Linear<Scalar>::create(store, name + ".reduction", 4 * in_dim, out_dim, rng)};
  }

  static std::int64_t param_count(std::int64_t in_dim, std::int64_t out_dim) {
    return LayerNorm<Scalar>::param_count(4 * in_dim) + Linear<Scalar>::param_count(4 * in_dim, out_dim);
  }

  Var<Scalar> operator()(Var<Scalar> x, std::vector<std::vector<int>> groups) const {
    return reduction(norm(concat_groups(x, std::move(groups))));
  }
};

// Fixed 2-D sine-cosine embedding of a grid_h x grid_w grid, one row per cell.
// The first half of the channels encodes the row, the second half the column.
template <typename Scalar>
Matrix<Scalar> sincos_embedding_2d(int grid_h, int grid_w, int dim) {
  if (dim % 4 != 0) throw ConfigError("positional embedding width must be divisible by 4");
  const int quarter = dim / 4;
  Matrix<Scalar> pe(grid_h * grid_w, dim);
  for (int y = 0; y < grid_h; ++y) {
    for (int x = 0; x < grid_w; ++x) {
      const int row = y * grid_w + x;
      for (int i = 0; i < quarter; ++i) {
        const double omega = 1.0 / std::pow(10000.0, double(i) / quarter);
        pe(row, i) = Scalar(std::sin(y * omega));
        pe(row, quarter + i) = Scalar(std::cos(y * omega));
        pe(row, 2 * quarter + i) = Scalar(std::sin(x * omega));
        pe(row, 3 * quarter + i) = Scalar(std::cos(x * omega));
      }
    }
  }
  return pe;
}

}  // namespace qptv2::nn
