#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qptv2/error.hpp"

namespace qptv2::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  bool decay = true;  // receives decoupled weight decay

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Named parameters in insertion order. Addresses are stable for the lifetime
// of the store, so layers may hold raw pointers into it.
template <typename Scalar>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter<Scalar>& add(std::string name, Matrix<Scalar> value, bool decay = true) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    index_[name] = params_.size();
    Parameter<Scalar>& p = params_.emplace_back();
    p.name = std::move(name);
    p.value = std::move(value);
    p.decay = decay;
    p.zero_grad();
    return p;
  }

  Parameter<Scalar>* find(const std::string& name) {
    const auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }
  const Parameter<Scalar>* find(const std::string& name) const {
    const auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }
  Parameter<Scalar>& at(const std::string& name) {
    Parameter<Scalar>* p = find(name);
    if (!p) throw ConfigError("no parameter named '" + name + "'");
    return *p;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  // Total scalar count of parameters whose name starts with `prefix`.
  std::int64_t count(const std::string& prefix = "") const {
    std::int64_t n = 0;
    for (const auto& p : params_)
      if (p.name.rfind(prefix, 0) == 0) n += p.size();
    return n;
  }

  template <typename Pred>
  std::vector<Parameter<Scalar>*> select(Pred&& pred) {
    std::vector<Parameter<Scalar>*> out;
    for (auto& p : params_)
      if (pred(p)) out.push_back(&p);
    return out;
  }

  // FNV-1a over names, shapes and raw value bytes.
  std::uint64_t checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* data, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 0x100000001b3ULL;
      }
    };
    for (const auto& p : params_) {
      feed(p.name.data(), p.name.size());
      const std::int64_t shape[2] = {p.value.rows(), p.value.cols()};
      feed(shape, sizeof(shape));
      feed(p.value.data(), sizeof(Scalar) * std::size_t(p.value.size()));
    }
    return h;
  }

 private:
  std::deque<Parameter<Scalar>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <typename Scalar>
class Graph;

// Handle to a node of a Graph.
template <typename Scalar>
struct Var {
  Graph<Scalar>* graph = nullptr;
  int id = -1;

  const Matrix<Scalar>& value() const { return graph->value(id); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const { return value()(0, 0); }
};

// Reverse-mode tape. Values are computed eagerly as ops are recorded;
// backward() walks the tape in reverse and accumulates into Parameter::grad.
template <typename Scalar>
class Graph {
 public:
  using Mat = Matrix<Scalar>;
  using Backward = std::function<void(Graph&, const Mat& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<Scalar> constant(Mat value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
  }

  // Leaf referencing a parameter without copying its value.
  Var<Scalar> param(Parameter<Scalar>& p) {
    Node n;
    n.external = &p.value;
    n.param = &p;
    n.requires_grad = true;
    return push(std::move(n));
  }

  Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> inputs, Backward backward) {
    Node n;
    n.value = std::move(value);
    for (const auto& v : inputs) n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }

  const Mat& value(int id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }

  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  template <typename Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }

  // Seeds d(root)/d(root) = 1; root must be 1x1.
  void backward(Var<Scalar> root) {
    if (root.rows() != 1 || root.cols() != 1) throw ParameterError("backward() needs a scalar root");
    accumulate(root.id, Mat::Ones(1, 1));
    for (int id = root.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.has_grad) continue;
      if (n.param) {
        n.param->grad += n.grad;
      } else if (n.backward) {
        n.backward(*this, n.grad);
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat grad;
    bool has_grad = false;
    bool requires_grad = false;
    Parameter<Scalar>* param = nullptr;
    Backward backward;
  };

  Var<Scalar> push(Node n) {
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Differentiable ops. Tokens are rows; features are columns.

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ParameterError("add: shape mismatch");
  const int ia = a.id, ib = b.id;
  return a.graph->record(a.value() + b.value(), {a, b}, [ia, ib](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
    g.accumulate(ia, gy);
    g.accumulate(ib, gy);
  });
}

template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ParameterError("sub: shape mismatch");
  const int ia = a.id, ib = b.id;
  return a.graph->record(a.value() - b.value(), {a, b}, [ia, ib](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
    g.accumulate(ia, gy);
    g.accumulate(ib, -gy);
  });
}

template <typename Scalar>
Var<Scalar> add_const(Var<Scalar> a, const Matrix<Scalar>& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) throw ParameterError("add_const: shape mismatch");
  const int ia = a.id;
  return a.graph->record(a.value() + c, {a},
                         [ia](Graph<Scalar>& g, const Matrix<Scalar>& gy) { g.accumulate(ia, gy); });
}

template <typename Scalar>
Var<Scalar> mul_const(Var<Scalar> a, const Matrix<Scalar>& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) throw ParameterError("mul_const: shape mismatch");
  const int ia = a.id;
  return a.graph->record(a.value().cwiseProduct(c), {a}, [ia, c](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
    g.accumulate(ia, gy.cwiseProduct(c));
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
  const int ia = a.id;
  return a.graph->record(a.value() * s, {a},
                         [ia, s](Graph<Scalar>& g, const Matrix<Scalar>& gy) { g.accumulate(ia, gy * s); });
}

// y = x W^T + b, with W of shape (out, in) and b of shape (1, out).
template <typename Scalar>
Var<Scalar> linear(Var<Scalar> x, Var<Scalar> w, Var<Scalar> b) {
  if (x.cols() != w.cols() || b.cols() != w.rows() || b.rows() != 1) {
    throw ParameterError("linear: shape mismatch (" + std::to_string(x.cols()) + " -> " +
                         std::to_string(w.cols()) + "x" + std::to_string(w.rows()) + ")");
  }
  Matrix<Scalar> y = x.value() * w.value().transpose();
  y.rowwise() += b.value().row(0);
  const int ix = x.id, iw = w.id, ib = b.id;
  return x.graph->record(std::move(y), {x, w, b}, [ix, iw, ib](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
    if (g.requires_grad(ix)) g.accumulate(ix, gy * g.value(iw));
    if (g.requires_grad(iw)) g.accumulate(iw, gy.transpose() * g.value(ix));
    g.accumulate(ib, gy.colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> layer_norm(Var<Scalar> x, Var<Scalar> gamma, Var<Scalar> beta, Scalar eps = Scalar(1e-6)) {
  const Matrix<Scalar>& xv = x.value();
  const Eigen::Index n = xv.rows(), d = xv.cols();
  if (gamma.cols() != d || beta.cols() != d) throw ParameterError("layer_norm: width mismatch");
  Matrix<Scalar> xhat(n, d);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Scalar mean = xv.row(r).mean();
    const Scalar var = (xv.row(r).array() - mean).square().mean();
    inv_std[r] = Scalar(1) / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mean) * inv_std[r];
  }
  Matrix<Scalar> y = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  y.rowwise() += beta.value().row(0);
  const int ix = x.id, ig = gamma.id, ib = beta.id;
  return x.graph->record(std::move(y), {x, gamma, beta},
                         [ix, ig, ib, xhat, inv_std](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
                           g.accumulate(ig, gy.cwiseProduct(xhat).colwise().sum());
                           g.accumulate(ib, gy.colwise().sum());
                           if (!g.requires_grad(ix)) return;
                           const Matrix<Scalar> dxhat =
                               (gy.array().rowwise() * g.value(ig).row(0).array()).matrix();
                           Matrix<Scalar> dx(dxhat.rows(), dxhat.cols());
                           for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                             const Scalar m1 = dxhat.row(r).mean();
                             const Scalar m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                             dx.row(r) = inv_std[r] * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                           }
                           g.accumulate(ix, dx);
                         });
}

// Exact (erf) GELU.
template <typename Scalar>
Var<Scalar> gelu(Var<Scalar> x) {
  const Matrix<Scalar>& xv = x.value();
  const Scalar inv_sqrt2 = Scalar(0.70710678118654752440);
  Matrix<Scalar> y = xv.unaryExpr([inv_sqrt2](Scalar v) { return Scalar(0.5) * v * (Scalar(1) + std::erf(v * inv_sqrt2)); });
  Matrix<Scalar> dydx = xv.unaryExpr([inv_sqrt2](Scalar v) {
    const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(v * inv_sqrt2));
    const Scalar pdf = std::exp(Scalar(-0.5) * v * v) * Scalar(0.39894228040143267794);
    return cdf + v * pdf;
  });
  const int ix = x.id;
  return x.graph->record(std::move(y), {x}, [ix, dydx](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
    g.accumulate(ix, gy.cwiseProduct(dydx));
  });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> x) {
  Matrix<Scalar> mask = (x.value().array() > Scalar(0)).template cast<Scalar>().matrix();
  const int ix = x.id;
  return x.graph->record(x.value().cwiseProduct(mask), {x}, [ix, mask](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
    g.accumulate(ix, gy.cwiseProduct(mask));
  });
}

namespace detail {

template <typename Scalar>
void softmax_rows_inplace(Matrix<Scalar>& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const Scalar mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

}  // namespace detail

// Multi-head scaled dot-product self-attention. `qkv` is (N, 3D) holding the
// query, key and value projections side by side; output is (N, D).
template <typename Scalar>
Var<Scalar> self_attention(Var<Scalar> qkv, int heads) {
  const Matrix<Scalar>& in = qkv.value();
  const Eigen::Index n = in.rows(), d = in.cols() / 3;
  if (in.cols() % 3 != 0 || heads < 1 || d % heads != 0) throw ParameterError("self_attention: bad width");
  const Eigen::Index dh = d / heads;
  const Scalar inv_scale = Scalar(1) / std::sqrt(Scalar(dh));
  std::vector<Matrix<Scalar>> probs(heads);
  Matrix<Scalar> out(n, d);
  for (int h = 0; h < heads; ++h) {
    const auto q = in.middleCols(h * dh, dh);
    const auto k = in.middleCols(d + h * dh, dh);
    const auto v = in.middleCols(2 * d + h * dh, dh);
    Matrix<Scalar> s = (q * k.transpose()) * inv_scale;
    detail::softmax_rows_inplace(s);
    out.middleCols(h * dh, dh) = s * v;
    probs[h] = std::move(s);
  }
  const int iq = qkv.id;
  return qkv.graph->record(std::move(out), {qkv},
                           [iq, heads, d, dh, inv_scale, probs](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
                             const Matrix<Scalar>& in = g.value(iq);
                             Matrix<Scalar> gin = Matrix<Scalar>::Zero(in.rows(), in.cols());
                             for (int h = 0; h < heads; ++h) {
                               const auto q = in.middleCols(h * dh, dh);
                               const auto k = in.middleCols(d + h * dh, dh);
                               const auto v = in.middleCols(2 * d + h * dh, dh);
                               const Matrix<Scalar>& p = probs[h];
                               const auto go = gy.middleCols(h * dh, dh);
                               const Matrix<Scalar> gp = go * v.transpose();
                               Matrix<Scalar> gs = p.cwiseProduct(gp);
                               const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_dot = gs.rowwise().sum();
                               gs -= p.cwiseProduct(row_dot.replicate(1, p.cols()));
                               gs *= inv_scale;
                               gin.middleCols(h * dh, dh) = gs * k;
                               gin.middleCols(d + h * dh, dh) = gs.transpose() * q;
                               gin.middleCols(2 * d + h * dh, dh) = p.transpose() * go;
                             }
                             g.accumulate(iq, gin);
                           });
}

// out.row(i) = x.row(idx[i]).
template <typename Scalar>
Var<Scalar> gather_rows(Var<Scalar> x, std::vector<int> idx) {
  const Matrix<Scalar>& xv = x.value();
  Matrix<Scalar> y(static_cast<Eigen::Index>(idx.size()), xv.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= xv.rows()) throw ParameterError("gather_rows: index out of range");
    y.row(static_cast<Eigen::Index>(i)) = xv.row(idx[i]);
  }
  const int ix = x.id;
  const Eigen::Index src_rows = xv.rows();
  return x.graph->record(std::move(y), {x},
                         [ix, idx = std::move(idx), src_rows](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
                           Matrix<Scalar> gx = Matrix<Scalar>::Zero(src_rows, gy.cols());
                           for (std::size_t i = 0; i < idx.size(); ++i) gx.row(idx[i]) += gy.row(Eigen::Index(i));
                           g.accumulate(ix, gx);
                         });
}

// out.row(g) = [x.row(groups[g][0]), x.row(groups[g][1]), ...]; all groups equal size.
template <typename Scalar>
Var<Scalar> concat_groups(Var<Scalar> x, std::vector<std::vector<int>> groups) {
  const Matrix<Scalar>& xv = x.value();
  const Eigen::Index d = xv.cols();
  const std::size_t k = groups.empty() ? 0 : groups.front().size();
  Matrix<Scalar> y(static_cast<Eigen::Index>(groups.size()), d * Eigen::Index(k));
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    if (groups[gi].size() != k) throw ParameterError("concat_groups: ragged groups");
    for (std::size_t j = 0; j < k; ++j) y.block(Eigen::Index(gi), Eigen::Index(j) * d, 1, d) = xv.row(groups[gi][j]);
  }
  const int ix = x.id;
  const Eigen::Index src_rows = xv.rows();
  return x.graph->record(std::move(y), {x},
                         [ix, groups = std::move(groups), src_rows, d, k](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
                           Matrix<Scalar> gx = Matrix<Scalar>::Zero(src_rows, d);
                           for (std::size_t gi = 0; gi < groups.size(); ++gi)
                             for (std::size_t j = 0; j < k; ++j)
                               gx.row(groups[gi][j]) += gy.block(Eigen::Index(gi), Eigen::Index(j) * d, 1, d);
                           g.accumulate(ix, gx);
                         });
}

// out.row(g) = mean of x rows listed in groups[g].
template <typename Scalar>
Var<Scalar> mean_groups(Var<Scalar> x, std::vector<std::vector<int>> groups) {
  const Matrix<Scalar>& xv = x.value();
  Matrix<Scalar> y = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(groups.size()), xv.cols());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    if (groups[gi].empty()) throw ParameterError("mean_groups: empty group");
    for (int r : groups[gi]) y.row(Eigen::Index(gi)) += xv.row(r);
    y.row(Eigen::Index(gi)) /= Scalar(groups[gi].size());
  }
  const int ix = x.id;
  const Eigen::Index src_rows = xv.rows();
  return x.graph->record(std::move(y), {x},
                         [ix, groups = std::move(groups), src_rows](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
                           Matrix<Scalar> gx = Matrix<Scalar>::Zero(src_rows, gy.cols());
                           for (std::size_t gi = 0; gi < groups.size(); ++gi) {
                             const Scalar w = Scalar(1) / Scalar(groups[gi].size());
                             for (int r : groups[gi]) gx.row(r) += w * gy.row(Eigen::Index(gi));
                           }
                           g.accumulate(ix, gx);
                         });
}

template <typename Scalar>
Var<Scalar> mean_rows(Var<Scalar> x) {
  std::vector<int> all(static_cast<std::size_t>(x.rows()));
  std::iota(all.begin(), all.end(), 0);
  return mean_groups(x, {std::move(all)});
}

template <typename Scalar>
Var<Scalar> vconcat(Var<Scalar> a, Var<Scalar> b) {
  if (a.cols() != b.cols()) throw ParameterError("vconcat: width mismatch");
  Matrix<Scalar> y(a.rows() + b.rows(), a.cols());
  y << a.value(), b.value();
  const int ia = a.id, ib = b.id;
  const Eigen::Index na = a.rows(), nb = b.rows();
  return a.graph->record(std::move(y), {a, b}, [ia, ib, na, nb](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
    g.accumulate(ia, gy.topRows(na));
    g.accumulate(ib, gy.bottomRows(nb));
  });
}

template <typename Scalar>
Var<Scalar> broadcast_rows(Var<Scalar> v, Eigen::Index n) {
  if (v.rows() != 1) throw ParameterError("broadcast_rows: expects a row vector");
  const int iv = v.id;
  return v.graph->record(v.value().replicate(n, 1), {v}, [iv](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
    g.accumulate(iv, gy.colwise().sum());
  });
}

// Softmax over the entries of a 1xK row.
template <typename Scalar>
Var<Scalar> softmax_row(Var<Scalar> logits) {
  if (logits.rows() != 1) throw ParameterError("softmax_row: expects a row vector");
  Matrix<Scalar> p = logits.value();
  detail::softmax_rows_inplace(p);
  const int il = logits.id;
  return logits.graph->record(p, {logits}, [il, p](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
    const Scalar dot = gy.cwiseProduct(p).sum();
    g.accumulate(il, p.cwiseProduct((gy.array() - dot).matrix()));
  });
}

// x * s(0, j).
template <typename Scalar>
Var<Scalar> scale_by(Var<Scalar> x, Var<Scalar> s, int j) {
  const Scalar w = s.value()(0, j);
  const int ix = x.id, is = s.id;
  const Eigen::Index sr = s.rows(), sc = s.cols();
  return x.graph->record(x.value() * w, {x, s}, [ix, is, j, sr, sc](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
    g.accumulate(ix, gy * g.value(is)(0, j));
    if (g.requires_grad(is)) {
      Matrix<Scalar> gs = Matrix<Scalar>::Zero(sr, sc);
      gs(0, j) = gy.cwiseProduct(g.value(ix)).sum();
      g.accumulate(is, gs);
    }
  });
}

template <typename Scalar>
Var<Scalar> mean_all(Var<Scalar> x) {
  const Scalar n = Scalar(x.value().size());
  const int ix = x.id;
  const Eigen::Index r = x.rows(), c = x.cols();
  return x.graph->record(Matrix<Scalar>::Constant(1, 1, x.value().sum() / n), {x},
                         [ix, n, r, c](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
                           g.accumulate(ix, Matrix<Scalar>::Constant(r, c, gy(0, 0) / n));
                         });
}

// Mean squared error against a constant target, as a 1x1 node.
template <typename Scalar>
Var<Scalar> mse(Var<Scalar> pred, const Matrix<Scalar>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ParameterError("mse: shape mismatch");
  Matrix<Scalar> diff = pred.value() - target;
  const Scalar n = Scalar(diff.size());
  const Scalar loss = diff.squaredNorm() / n;
  const int ip = pred.id;
  return pred.graph->record(Matrix<Scalar>::Constant(1, 1, loss), {pred},
                            [ip, diff, n](Graph<Scalar>& g, const Matrix<Scalar>& gy) {
                              g.accumulate(ip, diff * (Scalar(2) * gy(0, 0) / n));
                            });
}

}  // namespace qptv2::nn
