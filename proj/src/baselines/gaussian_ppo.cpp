#include "dppo/baselines/gaussian_ppo.hpp"

#include <cmath>
#include <stdexcept>

namespace dppo::baselines {

namespace {

std::vector<nd::Tensor*> tensors(std::vector<nd::NamedTensor> named) {
  std::vector<nd::Tensor*> out;
  for (auto& n : named) out.push_back(n.tensor);
  return out;
}

nd::AdamConfig constant_lr(double lr, double wd) {
  nd::AdamConfig c;
  c.lr = lr;
  c.lr_end = lr;
  c.weight_decay = wd;
  return c;
}

}  // namespace

GaussianPpoTrainer::GaussianPpoTrainer(GaussianPolicy policy, envlab::Normalizer norm, envlab::RunnerConfig rc,
                                       GaussianPpoConfig cfg, std::uint64_t seed)
    : Finetuner({cfg.iterations, cfg.eval_every, cfg.eval_episodes, cfg.target_success}),
      policy_(std::move(policy)),
      norm_(std::move(norm)),
      rc_(std::move(rc)),
      cfg_(std::move(cfg)),
      seed_(seed),
      runner_(rc_, norm_),
      critic_(policy_.config().obs_dim, cfg_.critic_hidden, nd::derive_seed(seed, 1)),
      actor_opt_(tensors(policy_.named_parameters()), constant_lr(cfg_.actor_lr, cfg_.weight_decay)),
      critic_opt_(tensors(critic_.named_parameters()), constant_lr(cfg_.critic_lr, 0.0)),
      rng_(nd::derive_seed(seed, 2)) {
  cfg_.validate();
  if (rc_.T_p != policy_.config().T_p || rc_.T_a != policy_.config().T_a) {
    throw std::invalid_argument("GaussianPpoTrainer: runner and policy chunk sizes differ");
  }
}

GaussianBatch GaussianPpoTrainer::collect() {
  const envlab::Rollout ro = envlab::rollout_chunked(runner_, gaussian_sampler(policy_, false), cfg_.steps_per_iter);
  env_steps_ += ro.ticks;
  GaussianBatch b;
  b.env = rl::make_env_batch(ro, critic_, cfg_.gamma_env, cfg_.gae_lambda);
  const std::size_t n = ro.n_envs;
  b.actions = nd::Tensor::matrix(b.env.rows(), policy_.config().chunk_dim());
  for (std::size_t t = 0; t < ro.steps(); ++t) {
    std::copy(ro.chunks[t].storage().begin(), ro.chunks[t].storage().end(), b.actions.row(t * n).begin());
  }
  b.logprob = policy_.logprob_eval(b.env.obs, b.actions);
  return b;
}

rl::UpdateStats GaussianPpoTrainer::update(const GaussianBatch& batch) {
  rl::UpdateStats st;
  const std::size_t n = batch.env.rows();
  for (int epoch = 0; epoch < cfg_.actor_epochs; ++epoch) {
    double loss_sum = 0.0, clip_sum = 0.0, kl_sum = 0.0;
    const auto batches = rl::epoch_batches(n, cfg_.actor_batch, rng_);
    for (const auto& idx : batches) {
      std::vector<double> old(idx.size()), adv(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) {
        old[k] = batch.logprob[idx[k]];
        adv[k] = batch.env.advantages[idx[k]];
      }
      if (cfg_.normalize_advantage) rl::normalize_advantages(adv);
      const std::vector<double> eps(idx.size(), cfg_.clip_eps);
      actor_opt_.zero_grad();
      nd::Tape tape;
      nd::Var lp = policy_.logprob(tape, nd::gather_rows(batch.env.obs, idx), nd::gather_rows(batch.actions, idx));
      rl::PpoLoss pl = rl::ppo_loss(lp, old, adv, eps);
      if (!std::isfinite(pl.loss.item())) throw nd::NonFiniteError("gaussian ppo: actor loss diverged");
      tape.backward(pl.loss);
      actor_opt_.step();
      policy_.clamp_log_std();
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
  st.value_loss = rl::fit_critic(critic_, critic_opt_, batch.env.obs, batch.env.returns, cfg_.critic_epochs,
                                 cfg_.critic_batch, rng_);
  return st;
}

rl::IterationStats GaussianPpoTrainer::iterate() {
  rl::IterationStats stats;
  begin_iteration(runner_, stats);
  const double lr = nd::cosine_lr(cfg_.actor_lr, cfg_.actor_lr_end, iteration_, cfg_.iterations);
  actor_opt_.set_lr(lr);
  stats.lr = lr;
  const GaussianBatch b = collect();
  rl::episode_stats(b.env.episodes, stats);
  const rl::UpdateStats up = update(b);
  stats.actor_loss = up.actor_loss;
  stats.value_loss = up.value_loss;
  stats.clip_fraction = up.clip_fraction;
  stats.approx_kl = up.approx_kl;
  stats.actor_epochs = up.actor_epochs;
  end_iteration(stats);
  return stats;
}

envlab::EvalSummary GaussianPpoTrainer::evaluate(std::size_t n_episodes) const {
  envlab::RunnerConfig rc = rc_;
  rc.seed = nd::derive_seed(seed_, 3);
  return evaluate_gaussian(policy_, norm_, rc, n_episodes, runner_.band());
}

std::vector<nd::NamedTensor> GaussianPpoTrainer::named_parameters() {
  std::vector<nd::NamedTensor> out = policy_.named_parameters();
  for (auto& p : critic_.named_parameters()) out.push_back(p);
  return out;
}

}  // namespace dppo::baselines
