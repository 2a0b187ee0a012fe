#pragma once

#include <cstdint>

#include "dppo/baselines/gaussian.hpp"
#include "dppo/rl/dppo_trainer.hpp"

namespace dppo::baselines {

// Shares the DPPO settings; gamma_denoise and clip_decay have no effect on a
// single-level MDP.
using GaussianPpoConfig = rl::DppoConfig;

// Environment-level transitions of a Gaussian rollout with the likelihood of
// each executed chunk under the sampling policy.
struct GaussianBatch {
  rl::EnvBatch env;
  nd::Tensor actions;           // row t * N + i
  std::vector<double> logprob;  // at sampling time
};

// Clipped PPO on the chunked environment MDP with a Gaussian policy.
class GaussianPpoTrainer : public rl::Finetuner {
 public:
  GaussianPpoTrainer(GaussianPolicy policy, envlab::Normalizer norm, envlab::RunnerConfig rc, GaussianPpoConfig cfg,
                     std::uint64_t seed);

  GaussianPpoTrainer(const GaussianPpoTrainer&) = delete;
  GaussianPpoTrainer& operator=(const GaussianPpoTrainer&) = delete;

  GaussianBatch collect();
  rl::UpdateStats update(const GaussianBatch& batch);
  rl::IterationStats iterate() override;
  envlab::EvalSummary evaluate(std::size_t n_episodes) const override;
  // Policy (gauss.) and critic (value.) tensors.
  std::vector<nd::NamedTensor> named_parameters() override;

  GaussianPolicy& policy() { return policy_; }
  const GaussianPolicy& policy() const { return policy_; }
  rl::ValueNet& critic() { return critic_; }
  const GaussianPpoConfig& config() const { return cfg_; }

 private:
  GaussianPolicy policy_;
  envlab::Normalizer norm_;
  envlab::RunnerConfig rc_;
  GaussianPpoConfig cfg_;
  std::uint64_t seed_;
  envlab::VecRunner runner_;
  rl::ValueNet critic_;
  nd::Adam actor_opt_;
  nd::Adam critic_opt_;
  nd::Rng rng_;
};

}  // namespace dppo::baselines
