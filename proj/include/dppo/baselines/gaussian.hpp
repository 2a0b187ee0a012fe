#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dppo/envlab/runner.hpp"
#include "dppo/nd/mlp.hpp"

namespace dppo::baselines {

struct GaussianConfig {
  std::size_t obs_dim = 4;
  std::size_t act_dim = 2;
  std::size_t T_p = 4;
  std::size_t T_a = 4;
  std::vector<std::size_t> hidden{128, 128, 128};
  nd::Activation activation = nd::Activation::kMish;
  // Initial (and pre-training) std per action dimension.
  double sigma_init = 0.1;
  double sigma_min = 0.01;
  double sigma_max = 0.2;
  // Sampled offsets are clipped at this many standard deviations.
  double sample_clip = 3.0;

  std::size_t chunk_dim() const { return T_p * act_dim; }
  void validate() const;
};

// Unimodal diagonal Gaussian over flattened action chunks: an MLP mean and a
// learned state-independent log-std kept inside [ln sigma_min, ln sigma_max].
class GaussianPolicy {
 public:
  GaussianPolicy(GaussianConfig cfg, std::uint64_t seed);

  const GaussianConfig& config() const { return cfg_; }

  nd::Var mean(nd::Tape& tape, const nd::Tensor& obs);
  nd::Tensor mean_eval(const nd::Tensor& obs) const;
  std::vector<double> sigma() const;

  // Per-row log N(actions; mean(obs), diag(sigma^2)), [B, 1]. Mean net and
  // log-std are both trainable.
  nd::Var logprob(nd::Tape& tape, const nd::Tensor& obs, const nd::Tensor& actions);
  // Same arithmetic, no gradients.
  std::vector<double> logprob_eval(const nd::Tensor& obs, const nd::Tensor& actions) const;

  // Row i draws its noise from rngs[i].
  nd::Tensor sample(const nd::Tensor& obs, std::span<nd::Rng> rngs) const;

  // Projects the log-std back into its range; call after every update.
  void clamp_log_std();
  void set_sigma(double sigma);

  nd::MlpNet& mean_net() { return mean_; }
  nd::Tensor& log_std() { return log_std_; }
  // mean.* and log_std.
  std::vector<nd::NamedTensor> named_parameters(const std::string& prefix = "gauss.");

 private:
  GaussianConfig cfg_;
  nd::MlpNet mean_;
  nd::Tensor log_std_;  // [1, chunk_dim]
};

// Behavior cloning with fixed std: mean squared error of the predicted mean.
nd::Var gaussian_bc_loss(nd::Tape& tape, GaussianPolicy& policy, const nd::Tensor& obs, const nd::Tensor& actions);

// Chunk sampler; `deterministic` returns the mean. The policy must outlive it.
envlab::ChunkSampler gaussian_sampler(const GaussianPolicy& policy, bool deterministic);

envlab::EvalSummary evaluate_gaussian(const GaussianPolicy& policy, const envlab::Normalizer& norm,
                                      const envlab::RunnerConfig& rc, std::size_t n_episodes,
                                      envlab::NoiseBand band = {});

}  // namespace dppo::baselines
