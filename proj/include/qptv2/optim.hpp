#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "qptv2/autodiff.hpp"
#include "qptv2/error.hpp"

namespace qptv2 {

struct AdamWConfig {
  double lr = 1.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.05;

  void validate() const {
    if (!(lr >= 0) || !(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(eps > 0) || !(weight_decay >= 0)) {
      throw ConfigError("invalid optimizer settings");
    }
  }
};

// Cosine annealing from base to min_lr over `total` steps, with optional
// linear warmup. The last step (total - 1) reaches min_lr exactly.
struct CosineSchedule {
  double base = 1e-3;
  double min_lr = 0.0;
  long total = 1;
  long warmup = 0;

  double operator()(long step) const {
    if (warmup > 0 && step < warmup) return base * double(step + 1) / double(warmup);
    const long span = total - warmup - 1;
    if (span <= 0) return base;
    const double t = std::clamp(double(step - warmup) / double(span), 0.0, 1.0);
    return min_lr + 0.5 * (base - min_lr) * (1.0 + std::cos(std::numbers::pi * t));
  }
};

// Adam with decoupled weight decay. Only parameters flagged `decay` are decayed.
template <typename Scalar>
class AdamW {
 public:
  AdamW(std::vector<nn::Parameter<Scalar>*> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    for (auto* p : params_) {
      m_.push_back(nn::Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(nn::Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    const auto b1 = Scalar(cfg_.beta1), b2 = Scalar(cfg_.beta2);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      nn::Parameter<Scalar>& p = *params_[i];
      if (p.decay && cfg_.weight_decay > 0) p.value *= Scalar(1.0 - lr * cfg_.weight_decay);
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * p.grad;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      const auto mhat = m_[i].array() / Scalar(bc1);
      const auto vhat = v_[i].array() / Scalar(bc2);
      p.value.array() -= Scalar(lr) * mhat / (vhat.sqrt() + Scalar(cfg_.eps));
    }
  }

  long steps_taken() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  std::vector<nn::Parameter<Scalar>*> params_;
  AdamWConfig cfg_;
  std::vector<nn::Matrix<Scalar>> m_, v_;
  long t_ = 0;
};

}  // namespace qptv2
