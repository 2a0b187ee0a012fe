#pragma once

#include <span>
#include <vector>

#include "dppo/diffusion/noise_predictor.hpp"
#include "dppo/diffusion/schedule.hpp"
#include "dppo/nd/rng.hpp"

namespace dppo::diffusion {

// Forward-noised training targets: noisy = sqrt(ab_k) * a0 + sqrt(1 - ab_k) * eps,
// with k uniform in [1, K] per row.
struct BcSample {
  nd::Tensor noisy;
  nd::Tensor eps;
  std::vector<int> levels;
};

BcSample make_bc_sample(const nd::Tensor& actions, const NoiseSchedule& sched, nd::Rng& rng);

// mean_i w_i * ||eps_i - eps_theta(noisy_i, obs_i, k_i)||^2; w = 1 when `weights` is empty.
nd::Var noise_regression_loss(nd::Tape& tape, NoisePredictor& net, const nd::Tensor& obs, const BcSample& sample,
                              std::span<const double> weights = {});

nd::Var bc_loss(nd::Tape& tape, NoisePredictor& net, const nd::Tensor& obs, const nd::Tensor& actions,
                const NoiseSchedule& sched, nd::Rng& rng);

}  // namespace dppo::diffusion
