#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dppo/nd/tensor.hpp"

namespace dppo::nd {

// lr_end + (lr_start - lr_end) * (1 + cos(pi * t / total)) / 2, with t clamped to [0, total].
double cosine_lr(double lr_start, double lr_end, std::int64_t t, std::int64_t total);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  // Cosine decay from lr to lr_end over total_steps optimizer steps.
  // total_steps = 0 keeps lr constant (callers may still drive set_lr()).
  double lr_end = 1e-3;
  std::int64_t total_steps = 0;
  std::optional<double> ema_decay;
};

// AdamW: bias-corrected Adam with decoupled weight decay.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamConfig cfg);

  // Applies one update from the parameters' grad buffers (missing buffers
  // count as zero). Throws NonFiniteError before touching any state if a
  // gradient is non-finite.
  void step();
  void zero_grad();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }

  bool has_ema() const { return cfg_.ema_decay.has_value(); }
  const std::vector<Tensor>& ema() const { return ema_; }
  // Copies the shadow weights into the live parameters.
  void load_ema_into_params();

 private:
  std::vector<Tensor*> params_;
  AdamConfig cfg_;
  double lr_;
  std::int64_t step_count_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::vector<Tensor> ema_;
};

}  // namespace dppo::nd
