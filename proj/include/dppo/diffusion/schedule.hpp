#pragma once

#include <vector>

#include "dppo/nd/tensor.hpp"

namespace dppo::diffusion {

// Cosine DDPM schedule. All arrays have K + 1 entries; index 0 is the clean
// level (alpha_bar[0] = 1, sigma[0] = 0) and index K the pure-noise level.
struct NoiseSchedule {
  int K = 0;
  std::vector<double> alpha_bar;
  std::vector<double> alpha;
  std::vector<double> beta;
  // Posterior std sqrt(beta_tilde_k); sigma[1] = 0.
  std::vector<double> sigma;
  double sigma_exp_min = 0.0;
  double sigma_prob_min = 0.0;

  double explore_sigma(int k) const;
  double prob_sigma(int k) const;
};

NoiseSchedule cosine_schedule(int K, double s = 0.008);

// mu = (a_k - beta_k / sqrt(1 - alpha_bar_k) * eps_hat) / sqrt(alpha_k), for k in [1, K].
nd::Tensor ddpm_mean(const nd::Tensor& a_k, const nd::Tensor& eps_hat, int k, const NoiseSchedule& sched);

// One DDIM transition from level k to level k_prev < k.
struct DdimStep {
  nd::Tensor mean;
  double sigma_eff = 0.0;
};

// sigma_k is the DDIM posterior std between the two levels:
// sqrt((1 - ab_prev) / (1 - ab_k) * (1 - ab_k / ab_prev)).
double ddim_sigma(const NoiseSchedule& sched, int k, int k_prev);
DdimStep ddim_step(const nd::Tensor& a_k, const nd::Tensor& eps_hat, int k, int k_prev, const NoiseSchedule& sched,
                   double eta);

// Levels visited by an n-step DDIM chain: tau[0] = 0, tau[i] = round(i * K / n).
std::vector<int> ddim_levels(int K, int n);

// Affine coefficients of a single reverse transition: mean = c_a * a + c_eps * eps_hat.
struct Transition {
  int level = 0;       // network timestep input (level of the input chunk)
  double c_a = 0.0;
  double c_eps = 0.0;
  double sigma = 0.0;  // unclipped transition std
};

// Reverse chains indexed by step j = 0..n-1; step j maps the chunk at chain
// position j + 1 to position j, so step 0 produces the clean chunk.
std::vector<Transition> ddpm_chain(const NoiseSchedule& sched);
std::vector<Transition> ddim_chain(const NoiseSchedule& sched, int n, double eta);

}  // namespace dppo::diffusion
