#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dppo/baselines/replay.hpp"
#include "dppo/diffusion/bc.hpp"
#include "dppo/diffusion/policy.hpp"
#include "dppo/rl/gae.hpp"
#include "dppo/rl/on_policy.hpp"

namespace dppo::baselines {

struct WrConfig {
  int iterations = 200;
  std::size_t steps_per_iter = 8;  // chunk steps per env per iteration
  double gamma_env = 0.99;
  double beta = 10.0;
  double w_max = 100.0;
  // Replay ratios: DRWR runs actor_replay epochs over the fresh batch; DAWR
  // takes rows / batch_size * ratio minibatch steps from the buffer.
  int actor_replay = 16;
  int critic_replay = 16;
  double lambda = 0.95;  // DAWR TD(lambda)
  std::size_t buffer_capacity = 100000;
  std::size_t batch_size = 1000;
  double actor_lr = 1e-5;
  double actor_lr_end = 1e-5;
  double critic_lr = 1e-3;
  double weight_decay = 0.0;
  std::vector<std::size_t> critic_hidden{256, 256, 256};
  int eval_every = 5;
  std::size_t eval_episodes = 100;
  double target_success = 0.0;

  void validate() const;
};

// min(exp(beta * x), w_max) per element.
std::vector<double> wr_weights(std::span<const double> signal, double beta, double w_max);

// Diffusion BC loss with per-row weights on freshly drawn noise and levels.
nd::Var weighted_bc_loss(nd::Tape& tape, diffusion::NoisePredictor& net, const nd::Tensor& obs,
                         const nd::Tensor& actions, std::span<const double> weights,
                         const diffusion::NoiseSchedule& sched, nd::Rng& rng);

// TD(lambda) advantages and lambda-returns over the whole buffer. Each
// stream's entries are taken in insertion order; the newest entry of a stream
// bootstraps from V(next_obs) unless terminal.
rl::GaeResult buffer_td_lambda(const ReplayBuffer& buf, const rl::ValueNet& critic, double gamma, double lambda);

// Diffusion reward-weighted regression: on-policy, no critic, weights from
// the discounted reward-to-go.
class DrwrTrainer : public rl::Finetuner {
 public:
  DrwrTrainer(diffusion::DiffusionPolicy policy, envlab::Normalizer norm, envlab::RunnerConfig rc, WrConfig cfg,
              std::uint64_t seed);

  DrwrTrainer(const DrwrTrainer&) = delete;
  DrwrTrainer& operator=(const DrwrTrainer&) = delete;

  rl::IterationStats iterate() override;
  envlab::EvalSummary evaluate(std::size_t n_episodes) const override;
  std::vector<nd::NamedTensor> named_parameters() override;

  diffusion::DiffusionPolicy& policy() { return policy_; }
  const WrConfig& config() const { return cfg_; }

 private:
  diffusion::DiffusionPolicy policy_;
  envlab::Normalizer norm_;
  envlab::RunnerConfig rc_;
  WrConfig cfg_;
  std::uint64_t seed_;
  envlab::VecRunner runner_;
  nd::Adam actor_opt_;
  nd::Rng rng_;
};

// Diffusion advantage-weighted regression: off-policy actor updates from a
// replay buffer, weights from TD(lambda) advantages of a state-value critic.
class DawrTrainer : public rl::Finetuner {
 public:
  DawrTrainer(diffusion::DiffusionPolicy policy, envlab::Normalizer norm, envlab::RunnerConfig rc, WrConfig cfg,
              std::uint64_t seed);

  DawrTrainer(const DawrTrainer&) = delete;
  DawrTrainer& operator=(const DawrTrainer&) = delete;

  rl::IterationStats iterate() override;
  envlab::EvalSummary evaluate(std::size_t n_episodes) const override;
  std::vector<nd::NamedTensor> named_parameters() override;

  diffusion::DiffusionPolicy& policy() { return policy_; }
  rl::ValueNet& critic() { return critic_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const WrConfig& config() const { return cfg_; }

 private:
  diffusion::DiffusionPolicy policy_;
  envlab::Normalizer norm_;
  envlab::RunnerConfig rc_;
  WrConfig cfg_;
  std::uint64_t seed_;
  envlab::VecRunner runner_;
  rl::ValueNet critic_;
  ReplayBuffer buffer_;
  nd::Adam actor_opt_;
  nd::Adam critic_opt_;
  nd::Rng rng_;
};

}  // namespace dppo::baselines
