#include "dppo/rl/dppo_trainer.hpp"

#include <any>
#include <cmath>
#include <stdexcept>

#include "dppo/diffusion/sampler.hpp"
#include "dppo/rl/samplers.hpp"

namespace dppo::rl {

void DppoConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("dppo: iterations must be non-negative");
  if (steps_per_iter < 1) throw std::invalid_argument("dppo: steps_per_iter must be positive");
  if (!(gamma_env >= 0 && gamma_env <= 1) || !(gamma_denoise >= 0 && gamma_denoise <= 1)) {
    throw std::invalid_argument("dppo: discounts must lie in [0, 1]");
  }
  if (!(gae_lambda >= 0 && gae_lambda <= 1)) throw std::invalid_argument("dppo: gae_lambda must lie in [0, 1]");
  if (!(clip_eps > 0)) throw std::invalid_argument("dppo: clip_eps must be positive");
  if (!(actor_lr > 0) || !(critic_lr > 0) || actor_lr_end < 0) throw std::invalid_argument("dppo: bad learning rate");
  if (actor_epochs < 0 || critic_epochs < 0) throw std::invalid_argument("dppo: epochs must be non-negative");
  if (actor_batch < 1 || critic_batch < 1) throw std::invalid_argument("dppo: batch sizes must be positive");
}

std::size_t DenoiseBuffer::row_of(std::size_t sample) const {
  const std::size_t per_env = env.steps * static_cast<std::size_t>(k_prime);
  const DiffusionMdpIndex idx{k_prime};
  return idx.step_of(sample % per_env) * env.n_envs + sample / per_env;
}

int DenoiseBuffer::step_of(std::size_t sample) const {
  const std::size_t per_env = env.steps * static_cast<std::size_t>(k_prime);
  return DiffusionMdpIndex{k_prime}.level_of(sample % per_env);
}

double DenoiseBuffer::reward(std::size_t sample) const {
  return step_of(sample) == 0 ? env.rewards[row_of(sample)] : 0.0;
}

double DenoiseBuffer::advantage(std::size_t sample, double gamma_denoise) const {
  return denoise_discount(env.advantages[row_of(sample)], step_of(sample), gamma_denoise);
}

DenoiseBuffer make_denoise_buffer(const envlab::Rollout& ro, const ValueNet& critic, int k_prime, double gamma,
                                  double lambda) {
  DenoiseBuffer buf;
  buf.env = make_env_batch(ro, critic, gamma, lambda);
  buf.k_prime = k_prime;
  const std::size_t n = ro.n_envs;
  const std::size_t rows = buf.env.rows();
  const std::size_t cd = ro.chunks.front().cols();
  buf.x_in.assign(static_cast<std::size_t>(k_prime), nd::Tensor::matrix(rows, cd));
  buf.x_out.assign(static_cast<std::size_t>(k_prime), nd::Tensor::matrix(rows, cd));
  buf.logprob = nd::Tensor::matrix(rows, static_cast<std::size_t>(k_prime));
  for (std::size_t t = 0; t < ro.steps(); ++t) {
    const auto* trace = std::any_cast<diffusion::DenoiseTrace>(&ro.payloads[t]);
    if (!trace) throw std::invalid_argument("make_denoise_buffer: rollout was not sampled by a diffusion policy");
    if (trace->steps() < static_cast<std::size_t>(k_prime)) {
      throw std::invalid_argument("make_denoise_buffer: trace shorter than K'");
    }
    for (int j = 0; j < k_prime; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = t * n + i;
        std::copy(trace->x[ju + 1].row(i).begin(), trace->x[ju + 1].row(i).end(), buf.x_in[ju].row(r).begin());
        std::copy(trace->x[ju].row(i).begin(), trace->x[ju].row(i).end(), buf.x_out[ju].row(r).begin());
        buf.logprob(r, ju) = trace->logprob(i, ju);
      }
    }
  }
  return buf;
}

namespace {

diffusion::DiffusionPolicy split_copy(diffusion::DiffusionPolicy p) {
  if (!p.is_split()) p.split_finetune_weights();
  return p;
}

std::vector<nd::Tensor*> tensors(std::vector<nd::NamedTensor> named) {
  std::vector<nd::Tensor*> out;
  for (auto& n : named) out.push_back(n.tensor);
  return out;
}

nd::AdamConfig adam_config(double lr, double wd) {
  nd::AdamConfig c;
  c.lr = lr;
  c.lr_end = lr;
  c.weight_decay = wd;
  return c;
}

}  // namespace

DppoTrainer::DppoTrainer(diffusion::DiffusionPolicy policy, envlab::Normalizer norm, envlab::RunnerConfig rc,
                         DppoConfig cfg, std::uint64_t seed)
    : Finetuner({cfg.iterations, cfg.eval_every, cfg.eval_episodes, cfg.target_success}),
      policy_(split_copy(std::move(policy))),
      norm_(std::move(norm)),
      rc_(std::move(rc)),
      cfg_(std::move(cfg)),
      seed_(seed),
      runner_(rc_, norm_),
      critic_(4, cfg_.critic_hidden, nd::derive_seed(seed, 1)),
      actor_opt_(tensors(policy_.finetuned().named_parameters()), adam_config(cfg_.actor_lr, cfg_.weight_decay)),
      critic_opt_(tensors(critic_.named_parameters()), adam_config(cfg_.critic_lr, 0.0)),
      eps_(clip_schedule(cfg_.clip_eps, policy_.config().K_prime)),
      rng_(nd::derive_seed(seed, 2)) {
  cfg_.validate();
  if (rc_.T_p != policy_.config().T_p || rc_.T_a != policy_.config().T_a) {
    throw std::invalid_argument("DppoTrainer: runner and policy chunk sizes differ");
  }
  if (!cfg_.clip_decay) eps_.assign(eps_.size(), cfg_.clip_eps);
}

DenoiseBuffer DppoTrainer::collect() {
  const envlab::Rollout ro =
      envlab::rollout_chunked(runner_, diffusion_sampler(policy_, diffusion::SampleMode::kExplore), cfg_.steps_per_iter);
  env_steps_ += ro.ticks;
  DenoiseBuffer buf = make_denoise_buffer(ro, critic_, policy_.config().K_prime, cfg_.gamma_env, cfg_.gae_lambda);
  return buf;
}

UpdateStats DppoTrainer::update(const DenoiseBuffer& buf) {
  UpdateStats st;
  const std::size_t n = buf.samples();
  std::vector<double> adv_all(n);
  for (std::size_t s = 0; s < n; ++s) adv_all[s] = buf.advantage(s, cfg_.gamma_denoise);
  for (int epoch = 0; epoch < cfg_.actor_epochs; ++epoch) {
    double loss_sum = 0.0, clip_sum = 0.0, kl_sum = 0.0;
    const auto batches = epoch_batches(n, cfg_.actor_batch, rng_);
    for (const auto& idx : batches) {
      const std::size_t b = idx.size();
      const std::size_t cd = buf.x_in.front().cols();
      nd::Tensor obs = nd::Tensor::matrix(b, buf.env.obs.cols());
      nd::Tensor x_in = nd::Tensor::matrix(b, cd), x_out = nd::Tensor::matrix(b, cd);
      std::vector<int> steps(b);
      std::vector<double> old(b), adv(b), eps(b);
      for (std::size_t k = 0; k < b; ++k) {
        const std::size_t r = buf.row_of(idx[k]);
        const int j = buf.step_of(idx[k]);
        const auto ju = static_cast<std::size_t>(j);
        std::copy(buf.env.obs.row(r).begin(), buf.env.obs.row(r).end(), obs.row(k).begin());
        std::copy(buf.x_in[ju].row(r).begin(), buf.x_in[ju].row(r).end(), x_in.row(k).begin());
        std::copy(buf.x_out[ju].row(r).begin(), buf.x_out[ju].row(r).end(), x_out.row(k).begin());
        steps[k] = j;
        old[k] = buf.logprob(r, ju);
        adv[k] = adv_all[idx[k]];
        eps[k] = eps_[ju];
      }
      if (cfg_.normalize_advantage) normalize_advantages(adv);
      actor_opt_.zero_grad();
      nd::Tape tape;
      nd::Var lp = diffusion::step_logprob(tape, policy_, obs, x_in, x_out, steps);
      PpoLoss pl = ppo_loss(lp, old, adv, eps);
      if (!std::isfinite(pl.loss.item())) throw nd::NonFiniteError("dppo: actor loss diverged");
      tape.backward(pl.loss);
      actor_opt_.step();
      loss_sum += pl.loss.item();
      clip_sum += pl.diag.clip_fraction;
      kl_sum += pl.diag.approx_kl;
    }
    const double nb = static_cast<double>(batches.size());
    st.actor_loss = loss_sum / nb;
    st.clip_fraction = clip_sum / nb;
    st.approx_kl = kl_sum / nb;
    st.actor_epochs = epoch + 1;
    if (cfg_.kl_stop > 0.0 && st.approx_kl >= cfg_.kl_stop) break;
  }
  st.value_loss =
      fit_critic(critic_, critic_opt_, buf.env.obs, buf.env.returns, cfg_.critic_epochs, cfg_.critic_batch, rng_);
  return st;
}

IterationStats DppoTrainer::iterate() {
  IterationStats stats;
  begin_iteration(runner_, stats);
  const double lr = nd::cosine_lr(cfg_.actor_lr, cfg_.actor_lr_end, iteration_, cfg_.iterations);
  actor_opt_.set_lr(lr);
  stats.lr = lr;
  const DenoiseBuffer buf = collect();
  episode_stats(buf.env.episodes, stats);
  const UpdateStats up = update(buf);
  stats.actor_loss = up.actor_loss;
  stats.value_loss = up.value_loss;
  stats.clip_fraction = up.clip_fraction;
  stats.approx_kl = up.approx_kl;
  stats.actor_epochs = up.actor_epochs;
  end_iteration(stats);
  return stats;
}

envlab::EvalSummary DppoTrainer::evaluate(std::size_t n_episodes) const {
  envlab::RunnerConfig rc = rc_;
  rc.seed = nd::derive_seed(seed_, 3);
  return evaluate_diffusion(policy_, norm_, rc, n_episodes, runner_.band());
}

std::vector<nd::NamedTensor> DppoTrainer::named_parameters() {
  std::vector<nd::NamedTensor> out = policy_.named_parameters();
  for (auto& p : critic_.named_parameters()) out.push_back(p);
  return out;
}

}  // namespace dppo::rl
