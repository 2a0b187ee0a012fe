#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dppo/baselines/gaussian.hpp"
#include "dppo/diffusion/policy.hpp"
#include "dppo/envlab/dataset.hpp"

namespace dppo::lab {

struct PretrainConfig {
  int epochs = 5000;
  std::size_t batch_size = 16;
  double lr = 1e-4;
  double lr_end = 1e-5;
  double weight_decay = 1e-6;
  double ema_decay = 0.995;
  // Chunk start stride over the demos; 0 means T_a.
  std::size_t stride = 0;
};

// Called after every epoch with the mean minibatch loss. Returning false
// stops training early.
using EpochHook = std::function<bool(int epoch, double loss)>;

// Behavior cloning of the noise predictor. On return the policy holds the
// EMA weights. Returns the per-epoch mean loss.
std::vector<double> pretrain_diffusion(diffusion::DiffusionPolicy& policy, const envlab::ChunkSamples& data,
                                       const PretrainConfig& cfg, std::uint64_t seed, const EpochHook& hook = {});

// Mean-squared-error cloning of the Gaussian mean; the std stays fixed.
std::vector<double> pretrain_gaussian(baselines::GaussianPolicy& policy, const envlab::ChunkSamples& data,
                                      const PretrainConfig& cfg, std::uint64_t seed, const EpochHook& hook = {});

}  // namespace dppo::lab
