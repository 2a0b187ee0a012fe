#include "dppo/diffusion/policy.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace dppo::diffusion {

SamplerKind sampler_from_string(std::string_view name) {
  if (name == "ddpm") return SamplerKind::kDdpm;
  if (name == "ddim") return SamplerKind::kDdim;
  throw std::invalid_argument("unknown sampler '" + std::string(name) + "'");
}

std::string_view to_string(SamplerKind kind) { return kind == SamplerKind::kDdim ? "ddim" : "ddpm"; }

void PolicyConfig::validate() const {
  if (T_a < 1 || T_a > T_p) throw std::invalid_argument("policy: need 1 <= T_a <= T_p");
  if (K < 1) throw std::invalid_argument("policy: K must be >= 1");
  if (sampler == SamplerKind::kDdim && (ddim_steps < 1 || ddim_steps > K)) {
    throw std::invalid_argument("policy: need 1 <= ddim_steps <= K");
  }
  if (K_prime < 1 || K_prime > chain_steps()) {
    throw std::invalid_argument("policy: need 1 <= K' <= " + std::to_string(chain_steps()));
  }
  if (net.chunk_dim != chunk_dim()) throw std::invalid_argument("policy: net chunk_dim must equal T_p * act_dim");
  if (net.residual) {
    const auto& h = net.head_hidden;
    if (h.size() % 2 == 0 || std::count(h.begin(), h.end(), h.front()) != static_cast<std::ptrdiff_t>(h.size())) {
      throw std::invalid_argument("policy: a residual head needs an odd number of equal-width hidden layers");
    }
  }
  if (sigma_exp_min < 0 || sigma_prob_min < 0 || sigma_eval_floor < 0) {
    throw std::invalid_argument("policy: sigma floors must be non-negative");
  }
  if (eta_train < 0 || eta_train > 1 || eta_eval < 0 || eta_eval > 1) {
    throw std::invalid_argument("policy: eta must lie in [0, 1]");
  }
}

DiffusionPolicy::DiffusionPolicy(PolicyConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  sched_ = cosine_schedule(cfg_.K, cfg_.schedule_s);
  sched_.sigma_exp_min = cfg_.sigma_exp_min;
  sched_.sigma_prob_min = cfg_.sigma_prob_min;
  if (cfg_.sampler == SamplerKind::kDdim) {
    explore_chain_ = ddim_chain(sched_, cfg_.ddim_steps, cfg_.eta_train);
    eval_chain_ = ddim_chain(sched_, cfg_.ddim_steps, cfg_.eta_eval);
  } else {
    explore_chain_ = ddpm_chain(sched_);
    eval_chain_ = explore_chain_;
  }
  nd::Rng rng(seed);
  base_ = NoisePredictor(cfg_.net, rng);
}

DiffusionPolicy::DiffusionPolicy(const DiffusionPolicy& other)
    : cfg_(other.cfg_),
      sched_(other.sched_),
      explore_chain_(other.explore_chain_),
      eval_chain_(other.eval_chain_),
      base_(other.base_),
      ft_(other.ft_ ? std::make_unique<NoisePredictor>(*other.ft_) : nullptr) {}

DiffusionPolicy& DiffusionPolicy::operator=(const DiffusionPolicy& other) {
  if (this != &other) {
    DiffusionPolicy tmp(other);
    cfg_ = std::move(tmp.cfg_);
    sched_ = std::move(tmp.sched_);
    explore_chain_ = std::move(tmp.explore_chain_);
    eval_chain_ = std::move(tmp.eval_chain_);
    base_ = std::move(tmp.base_);
    ft_ = std::move(tmp.ft_);
  }
  return *this;
}

NoisePredictor& DiffusionPolicy::finetuned() {
  if (!ft_) throw std::logic_error("policy has no fine-tuned copy");
  return *ft_;
}

const NoisePredictor& DiffusionPolicy::finetuned() const {
  if (!ft_) throw std::logic_error("policy has no fine-tuned copy");
  return *ft_;
}

void DiffusionPolicy::split_finetune_weights() {
  if (ft_) throw std::logic_error("split_finetune_weights: policy already split");
  ft_ = std::make_unique<NoisePredictor>(base_);
}

const std::vector<Transition>& DiffusionPolicy::chain(SampleMode mode) const {
  return mode == SampleMode::kExplore ? explore_chain_ : eval_chain_;
}

double DiffusionPolicy::sample_sigma(int step, SampleMode mode) const {
  const double raw = chain(mode).at(step).sigma;
  if (mode == SampleMode::kExplore) return std::max(raw, cfg_.sigma_exp_min);
  // Deterministic DDIM evaluation keeps eta_eval * sigma unfloored.
  if (cfg_.sampler == SamplerKind::kDdim) return raw;
  return std::max(raw, cfg_.sigma_eval_floor);
}

double DiffusionPolicy::prob_sigma(int step) const {
  return std::max(explore_chain_.at(step).sigma, cfg_.sigma_prob_min);
}

const NoisePredictor& DiffusionPolicy::net_for_step(int step) const {
  return (ft_ && step < cfg_.K_prime) ? *ft_ : base_;
}

NoisePredictor& DiffusionPolicy::trainable_net() { return ft_ ? *ft_ : base_; }

void DiffusionPolicy::set_sigma_floors(double exp_min, double prob_min) {
  if (exp_min < 0 || prob_min < 0) throw std::invalid_argument("sigma floors must be non-negative");
  cfg_.sigma_exp_min = exp_min;
  cfg_.sigma_prob_min = prob_min;
  sched_.sigma_exp_min = exp_min;
  sched_.sigma_prob_min = prob_min;
}

std::vector<nd::NamedTensor> DiffusionPolicy::named_parameters() {
  std::vector<nd::NamedTensor> out = base_.named_parameters("base.");
  if (ft_) {
    for (auto& p : ft_->named_parameters("ft.")) out.push_back(p);
  }
  return out;
}

}  // namespace dppo::diffusion
