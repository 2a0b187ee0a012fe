#include "dppo/nd/adam.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dppo::nd {

double cosine_lr(double lr_start, double lr_end, std::int64_t t, std::int64_t total) {
  if (total <= 0) return lr_start;
  const double frac = static_cast<double>(std::clamp<std::int64_t>(t, 0, total)) / static_cast<double>(total);
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(std::numbers::pi * frac));
}

Adam::Adam(std::vector<Tensor*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg), lr_(cfg.lr) {
  if (cfg_.lr < 0 || cfg_.eps <= 0 || cfg_.beta1 < 0 || cfg_.beta1 >= 1 || cfg_.beta2 < 0 || cfg_.beta2 >= 1) {
    throw std::invalid_argument("Adam: invalid hyperparameters");
  }
  if (cfg_.ema_decay && (*cfg_.ema_decay < 0 || *cfg_.ema_decay > 1)) {
    throw std::invalid_argument("Adam: ema_decay must lie in [0, 1]");
  }
  for (Tensor* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
    if (cfg_.ema_decay) ema_.push_back(Tensor(p->shape(), p->storage()));
  }
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Tensor& p = *params_[i];
    if (p.has_grad() && !all_finite(p.grad())) {
      throw NonFiniteError("Adam: non-finite gradient in parameter " + std::to_string(i) + " of shape " +
                           shape_string(p.shape()) + "; step aborted");
    }
  }
  ++step_count_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    auto data = p.data();
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    const bool has_grad = p.has_grad();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = has_grad ? p.grad()[j] : 0.0;
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      data[j] -= lr_ * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * data[j]);
    }
    if (cfg_.ema_decay) {
      const double d = *cfg_.ema_decay;
      auto shadow = ema_[i].data();
      for (std::size_t j = 0; j < data.size(); ++j) shadow[j] = d * shadow[j] + (1.0 - d) * data[j];
    }
  }
  if (cfg_.total_steps > 0) lr_ = cosine_lr(cfg_.lr, cfg_.lr_end, step_count_, cfg_.total_steps);
}

void Adam::zero_grad() {
  for (Tensor* p : params_) p->zero_grad();
}

void Adam::load_ema_into_params() {
  if (!cfg_.ema_decay) throw std::logic_error("Adam: EMA is disabled");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    std::copy(ema_[i].storage().begin(), ema_[i].storage().end(), params_[i]->storage().begin());
  }
}

}  // namespace dppo::nd
