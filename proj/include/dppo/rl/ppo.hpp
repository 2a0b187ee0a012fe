#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "dppo/nd/tape.hpp"

namespace dppo::rl {

// Flat position of (env step t, denoising step k) in the unrolled two-level
// MDP restricted to the fine-tuned tail: t * K' + (K' - k - 1).
struct DiffusionMdpIndex {
  int k_prime = 1;

  std::size_t flat(std::size_t t, int k) const;
  std::size_t step_of(std::size_t flat) const { return flat / static_cast<std::size_t>(k_prime); }
  int level_of(std::size_t flat) const;
};

// eps_k = eps0 * 0.1^(k / (K' - 1)); eps0 when K' = 1.
std::vector<double> clip_schedule(double eps0, int k_prime);

// In-place shift to mean 0 and scale to std 1 (population std). Single
// elements and constant batches are only centered.
void normalize_advantages(std::span<double> adv);

struct PpoDiagnostics {
  double clip_fraction = 0.0;  // share of samples with |ratio - 1| > eps
  double approx_kl = 0.0;      // mean of (ratio - 1) - log(ratio)
};

struct PpoLoss {
  nd::Var loss;
  PpoDiagnostics diag;
};

// -mean(min(A * r, A * clip(r, 1 - eps, 1 + eps))) with r = exp(new - old).
// new_logprob is [B, 1]; eps holds one clip ratio per sample.
PpoLoss ppo_loss(const nd::Var& new_logprob, std::span<const double> old_logprob, std::span<const double> adv,
                 std::span<const double> eps);

// mean((pred - target)^2) over a [B, 1] prediction.
nd::Var value_loss(const nd::Var& pred, std::span<const double> target);

// advantage * gamma_denoise^k for the denoising step k of an env step.
inline double denoise_discount(double advantage, int k, double gamma_denoise) {
  return advantage * std::pow(gamma_denoise, k);
}

}  // namespace dppo::rl
