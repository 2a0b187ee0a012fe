#pragma once

#include <cstdint>
#include <memory>
#include <string_view>

#include "dppo/diffusion/noise_predictor.hpp"
#include "dppo/diffusion/schedule.hpp"

namespace dppo::diffusion {

enum class SamplerKind { kDdpm, kDdim };
enum class SampleMode { kExplore, kEval };

SamplerKind sampler_from_string(std::string_view name);
std::string_view to_string(SamplerKind kind);

struct PolicyConfig {
  NoisePredictorSpec net;
  std::size_t act_dim = 2;
  std::size_t T_p = 4;
  std::size_t T_a = 4;
  int K = 20;
  int K_prime = 10;
  SamplerKind sampler = SamplerKind::kDdpm;
  int ddim_steps = 5;
  double eta_train = 1.0;
  double eta_eval = 0.0;
  double sigma_exp_min = 0.1;
  double sigma_prob_min = 0.1;
  double sigma_eval_floor = 0.001;
  double schedule_s = 0.008;

  std::size_t chunk_dim() const { return T_p * act_dim; }
  // Denoising steps actually run by the sampler (K, or the DDIM step count).
  int chain_steps() const { return sampler == SamplerKind::kDdim ? ddim_steps : K; }
  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

// Conditional diffusion policy over flattened action chunks. After
// split_finetune_weights(), chain steps j < K' run the fine-tuned copy and the
// earlier steps keep the frozen pre-trained network.
class DiffusionPolicy {
 public:
  DiffusionPolicy(PolicyConfig cfg, std::uint64_t seed);
  DiffusionPolicy(const DiffusionPolicy& other);
  DiffusionPolicy& operator=(const DiffusionPolicy& other);

  const PolicyConfig& config() const { return cfg_; }
  const NoiseSchedule& schedule() const { return sched_; }
  int chain_steps() const { return cfg_.chain_steps(); }

  NoisePredictor& base() { return base_; }
  const NoisePredictor& base() const { return base_; }
  bool is_split() const { return ft_ != nullptr; }
  NoisePredictor& finetuned();
  const NoisePredictor& finetuned() const;

  void split_finetune_weights();

  const std::vector<Transition>& chain(SampleMode mode) const;
  double sample_sigma(int step, SampleMode mode) const;
  double prob_sigma(int step) const;
  const NoisePredictor& net_for_step(int step) const;
  // The network whose weights receive gradients (fine-tuned copy when split).
  NoisePredictor& trainable_net();

  // Runtime knobs that do not change the weights.
  void set_sigma_floors(double exp_min, double prob_min);

  // base.* always; ft.* as well when split.
  std::vector<nd::NamedTensor> named_parameters();

 private:
  PolicyConfig cfg_;
  NoiseSchedule sched_;
  std::vector<Transition> explore_chain_;
  std::vector<Transition> eval_chain_;
  NoisePredictor base_;
  std::unique_ptr<NoisePredictor> ft_;
};

}  // namespace dppo::diffusion
