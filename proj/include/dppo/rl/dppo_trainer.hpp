#pragma once

#include <cstdint>
#include <vector>

#include "dppo/diffusion/policy.hpp"
#include "dppo/envlab/runner.hpp"
#include "dppo/rl/on_policy.hpp"
#include "dppo/rl/ppo.hpp"
#include "dppo/rl/value.hpp"

namespace dppo::rl {

struct DppoConfig {
  int iterations = 200;
  std::size_t steps_per_iter = 8;  // chunk steps per env per iteration
  double gamma_env = 0.99;
  double gamma_denoise = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.01;
  bool clip_decay = true;  // per-denoising-step schedule, else eps everywhere
  double actor_lr = 1e-4;
  double actor_lr_end = 1e-5;
  double critic_lr = 1e-3;
  double weight_decay = 0.0;
  int actor_epochs = 10;
  int critic_epochs = 10;
  std::size_t actor_batch = 1000;
  std::size_t critic_batch = 100;
  double kl_stop = 1.0;  // <= 0 disables the early stop
  bool normalize_advantage = true;
  std::vector<std::size_t> critic_hidden{256, 256, 256};
  int eval_every = 5;  // 0 disables periodic evaluation
  std::size_t eval_episodes = 100;
  // Stop once a periodic evaluation reaches this top-mode success (<= 0: never).
  double target_success = 0.0;

  void validate() const;
};

// Fine-tuned tail of every chunk decision in a rollout, plus env-level data.
struct DenoiseBuffer {
  EnvBatch env;
  int k_prime = 1;
  std::vector<nd::Tensor> x_in;   // per tail step j: chain input, row = env row
  std::vector<nd::Tensor> x_out;  // per tail step j: chain output
  nd::Tensor logprob;             // [rows, K'] likelihoods at sampling time

  std::size_t samples() const { return env.rows() * static_cast<std::size_t>(k_prime); }
  // Sample s belongs to env s / (steps * K') at flat index s % (steps * K').
  std::size_t row_of(std::size_t sample) const;
  int step_of(std::size_t sample) const;
  // Reward of the two-level MDP: the env reward at k = 0, zero elsewhere.
  double reward(std::size_t sample) const;
  double advantage(std::size_t sample, double gamma_denoise) const;
};

DenoiseBuffer make_denoise_buffer(const envlab::Rollout& ro, const ValueNet& critic, int k_prime, double gamma,
                                  double lambda);

struct UpdateStats {
  double actor_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  int actor_epochs = 0;
};

// Algorithm 1: PPO over the unrolled denoising chain, fine-tuning the last K'
// steps of a pre-trained diffusion policy.
class DppoTrainer : public Finetuner {
 public:
  DppoTrainer(diffusion::DiffusionPolicy policy, envlab::Normalizer norm, envlab::RunnerConfig rc, DppoConfig cfg,
              std::uint64_t seed);

  DppoTrainer(const DppoTrainer&) = delete;
  DppoTrainer& operator=(const DppoTrainer&) = delete;

  DenoiseBuffer collect();
  UpdateStats update(const DenoiseBuffer& buf);
  IterationStats iterate() override;
  envlab::EvalSummary evaluate(std::size_t n_episodes) const override;

  const diffusion::DiffusionPolicy& policy() const { return policy_; }
  diffusion::DiffusionPolicy& policy() { return policy_; }
  ValueNet& critic() { return critic_; }
  const DppoConfig& config() const { return cfg_; }
  // Policy (base. / ft.) and critic (value.) tensors.
  std::vector<nd::NamedTensor> named_parameters() override;

 private:
  diffusion::DiffusionPolicy policy_;
  envlab::Normalizer norm_;
  envlab::RunnerConfig rc_;
  DppoConfig cfg_;
  std::uint64_t seed_;
  envlab::VecRunner runner_;
  ValueNet critic_;
  nd::Adam actor_opt_;
  nd::Adam critic_opt_;
  std::vector<double> eps_;
  nd::Rng rng_;
};

}  // namespace dppo::rl
