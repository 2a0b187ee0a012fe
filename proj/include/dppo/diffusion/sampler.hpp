#pragma once

#include <span>
#include <vector>

#include "dppo/diffusion/policy.hpp"
#include "dppo/nd/rng.hpp"
#include "dppo/nd/tape.hpp"

namespace dppo::diffusion {

// Record of one batched reverse chain with n = policy.chain_steps() steps.
struct DenoiseTrace {
  // x[n] is the initial noise, x[j] the output of step j, x[0] the raw sample.
  std::vector<nd::Tensor> x;
  std::vector<nd::Tensor> mean;        // per step j
  std::vector<double> sigma;           // sampling std per step j
  std::vector<double> prob_sigma;      // likelihood std per step j
  nd::Tensor logprob;                  // [B, n]: log N(x[j]; mean[j], prob_sigma[j]^2 I)
  nd::Tensor action;                   // x[0] clamped to [-1, 1]

  std::size_t steps() const { return mean.size(); }
};

// Samples one chunk per row of `obs`; row i draws all of its noise from
// rngs[i], so rows are statistically and numerically independent of each
// other. `initial` (optional) replaces the initial noise draw.
DenoiseTrace sample_chunk(const DiffusionPolicy& policy, const nd::Tensor& obs, std::span<nd::Rng> rngs,
                          SampleMode mode, const nd::Tensor* initial = nullptr);

// Taped per-row log-likelihood of x_out given (x_in, obs) at chain step
// steps[i], evaluated with the network that owns that step and the
// likelihood std. Only the fine-tuned tail (steps < K') is trainable; other
// steps use frozen weights. Returns [B, 1].
nd::Var step_logprob(nd::Tape& tape, DiffusionPolicy& policy, const nd::Tensor& obs, const nd::Tensor& x_in,
                     const nd::Tensor& x_out, std::span<const int> steps);

// Untaped counterpart of step_logprob.
std::vector<double> step_logprob_eval(const DiffusionPolicy& policy, const nd::Tensor& obs, const nd::Tensor& x_in,
                                      const nd::Tensor& x_out, std::span<const int> steps);

}  // namespace dppo::diffusion
