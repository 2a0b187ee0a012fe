#include "dppo/baselines/weighted_regression.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "dppo/rl/ppo.hpp"
#include "dppo/rl/samplers.hpp"

namespace dppo::baselines {

void WrConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("wr: iterations must be non-negative");
  if (steps_per_iter < 1) throw std::invalid_argument("wr: steps_per_iter must be positive");
  if (!(beta > 0)) throw std::invalid_argument("wr: beta must be positive");
  if (!(w_max >= 1)) throw std::invalid_argument("wr: w_max must be at least 1");
  if (!(gamma_env >= 0 && gamma_env <= 1)) throw std::invalid_argument("wr: gamma_env must lie in [0, 1]");
  if (!(lambda >= 0 && lambda <= 1)) throw std::invalid_argument("wr: lambda must lie in [0, 1]");
  if (actor_replay < 0 || critic_replay < 0) throw std::invalid_argument("wr: replay ratios must be non-negative");
  if (buffer_capacity < 1 || batch_size < 1) throw std::invalid_argument("wr: sizes must be positive");
  if (!(actor_lr > 0) || !(critic_lr > 0) || actor_lr_end < 0) throw std::invalid_argument("wr: bad learning rate");
}

std::vector<double> wr_weights(std::span<const double> signal, double beta, double w_max) {
  std::vector<double> w(signal.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::min(std::exp(beta * signal[i]), w_max);
  return w;
}

nd::Var weighted_bc_loss(nd::Tape& tape, diffusion::NoisePredictor& net, const nd::Tensor& obs,
                         const nd::Tensor& actions, std::span<const double> weights,
                         const diffusion::NoiseSchedule& sched, nd::Rng& rng) {
  const diffusion::BcSample s = diffusion::make_bc_sample(actions, sched, rng);
  return diffusion::noise_regression_loss(tape, net, obs, s, weights);
}

rl::GaeResult buffer_td_lambda(const ReplayBuffer& buf, const rl::ValueNet& critic, double gamma, double lambda) {
  const std::vector<std::size_t> idx = buf.all();
  const std::vector<double> v = critic.predict(buf.obs(idx));
  const std::vector<double> nv = critic.predict(buf.next_obs(idx));
  std::map<std::size_t, std::vector<std::size_t>> streams;
  for (std::size_t i : idx) streams[buf.at(i).stream].push_back(i);
  rl::GaeResult out;
  out.advantages.resize(idx.size());
  out.returns.resize(idx.size());
  for (const auto& [stream, rows] : streams) {
    const std::size_t n = rows.size();
    std::vector<double> r(n), vs(n), nvs(n);
    std::vector<std::uint8_t> term(n), end(n);
    for (std::size_t t = 0; t < n; ++t) {
      const auto e = buf.at(rows[t]);
      r[t] = e.reward;
      vs[t] = v[rows[t]];
      nvs[t] = nv[rows[t]];
      term[t] = e.terminal;
      end[t] = e.episode_end || t + 1 == n;
    }
    const rl::GaeResult g = rl::gae(r, vs, nvs, term, end, gamma, lambda);
    for (std::size_t t = 0; t < n; ++t) {
      out.advantages[rows[t]] = g.advantages[t];
      out.returns[rows[t]] = g.returns[t];
    }
  }
  return out;
}

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

// Executed chunks of a rollout, row t * N + i.
nd::Tensor rollout_actions(const envlab::Rollout& ro) {
  const std::size_t n = ro.n_envs;
  nd::Tensor a = nd::Tensor::matrix(ro.steps() * n, ro.chunks.front().cols());
  for (std::size_t t = 0; t < ro.steps(); ++t) {
    std::copy(ro.chunks[t].storage().begin(), ro.chunks[t].storage().end(), a.row(t * n).begin());
  }
  return a;
}

double weighted_step(diffusion::DiffusionPolicy& policy, nd::Adam& opt, const nd::Tensor& obs,
                     const nd::Tensor& actions, std::span<const double> w, nd::Rng& rng) {
  opt.zero_grad();
  nd::Tape tape;
  nd::Var loss = weighted_bc_loss(tape, policy.trainable_net(), obs, actions, w, policy.schedule(), rng);
  if (!std::isfinite(loss.item())) throw nd::NonFiniteError("weighted regression: actor loss diverged");
  tape.backward(loss);
  opt.step();
  return loss.item();
}

// rows / batch * ratio, at least one step when the ratio is positive.
std::size_t replay_steps(std::size_t rows, std::size_t batch, int ratio) {
  if (ratio <= 0) return 0;
  const double s = static_cast<double>(rows) / static_cast<double>(batch) * ratio;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(s)));
}

}  // namespace

DrwrTrainer::DrwrTrainer(diffusion::DiffusionPolicy policy, envlab::Normalizer norm, envlab::RunnerConfig rc,
                         WrConfig cfg, std::uint64_t seed)
    : Finetuner({cfg.iterations, cfg.eval_every, cfg.eval_episodes, cfg.target_success}),
      policy_(std::move(policy)),
      norm_(std::move(norm)),
      rc_(std::move(rc)),
      cfg_(std::move(cfg)),
      seed_(seed),
      runner_(rc_, norm_),
      actor_opt_(tensors(policy_.trainable_net().named_parameters()), constant_lr(cfg_.actor_lr, cfg_.weight_decay)),
      rng_(nd::derive_seed(seed, 2)) {
  cfg_.validate();
  if (rc_.T_p != policy_.config().T_p || rc_.T_a != policy_.config().T_a) {
    throw std::invalid_argument("DrwrTrainer: runner and policy chunk sizes differ");
  }
}

rl::IterationStats DrwrTrainer::iterate() {
  rl::IterationStats stats;
  begin_iteration(runner_, stats);
  const double lr = nd::cosine_lr(cfg_.actor_lr, cfg_.actor_lr_end, iteration_, cfg_.iterations);
  actor_opt_.set_lr(lr);
  stats.lr = lr;
  const envlab::Rollout ro =
      envlab::rollout_chunked(runner_, rl::diffusion_sampler(policy_, diffusion::SampleMode::kExplore),
                              cfg_.steps_per_iter);
  env_steps_ += ro.ticks;
  rl::episode_stats(ro.episodes, stats);

  const std::size_t n = ro.n_envs, steps = ro.steps();
  nd::Tensor obs = nd::Tensor::matrix(steps * n, ro.obs.front().cols());
  for (std::size_t t = 0; t < steps; ++t) {
    std::copy(ro.obs[t].storage().begin(), ro.obs[t].storage().end(), obs.row(t * n).begin());
  }
  const nd::Tensor actions = rollout_actions(ro);
  // Episodes still running at the end of the rollout are cut without bootstrap.
  std::vector<double> rtg(steps * n);
  std::vector<double> r(steps);
  std::vector<std::uint8_t> d(steps);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < steps; ++t) {
      r[t] = ro.rewards[t][i];
      d[t] = ro.dones[t][i];
    }
    const std::vector<double> g = rl::reward_to_go(r, d, cfg_.gamma_env);
    for (std::size_t t = 0; t < steps; ++t) rtg[t * n + i] = g[t];
  }
  const std::vector<double> w = wr_weights(rtg, cfg_.beta, cfg_.w_max);

  double loss = 0.0;
  for (int epoch = 0; epoch < cfg_.actor_replay; ++epoch) {
    const auto batches = rl::epoch_batches(obs.rows(), cfg_.batch_size, rng_);
    double sum = 0.0;
    for (const auto& idx : batches) {
      std::vector<double> wb(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) wb[k] = w[idx[k]];
      sum += weighted_step(policy_, actor_opt_, nd::gather_rows(obs, idx), nd::gather_rows(actions, idx), wb, rng_);
    }
    loss = sum / static_cast<double>(batches.size());
    stats.actor_epochs = epoch + 1;
  }
  stats.actor_loss = loss;
  end_iteration(stats);
  return stats;
}

envlab::EvalSummary DrwrTrainer::evaluate(std::size_t n_episodes) const {
  envlab::RunnerConfig rc = rc_;
  rc.seed = nd::derive_seed(seed_, 3);
  return rl::evaluate_diffusion(policy_, norm_, rc, n_episodes, runner_.band());
}

std::vector<nd::NamedTensor> DrwrTrainer::named_parameters() { return policy_.named_parameters(); }

DawrTrainer::DawrTrainer(diffusion::DiffusionPolicy policy, envlab::Normalizer norm, envlab::RunnerConfig rc,
                         WrConfig cfg, std::uint64_t seed)
    : Finetuner({cfg.iterations, cfg.eval_every, cfg.eval_episodes, cfg.target_success}),
      policy_(std::move(policy)),
      norm_(std::move(norm)),
      rc_(std::move(rc)),
      cfg_(std::move(cfg)),
      seed_(seed),
      runner_(rc_, norm_),
      critic_(4, cfg_.critic_hidden, nd::derive_seed(seed, 1)),
      buffer_(cfg_.buffer_capacity, 4, policy_.config().chunk_dim()),
      actor_opt_(tensors(policy_.trainable_net().named_parameters()), constant_lr(cfg_.actor_lr, cfg_.weight_decay)),
      critic_opt_(tensors(critic_.named_parameters()), constant_lr(cfg_.critic_lr, 0.0)),
      rng_(nd::derive_seed(seed, 2)) {
  cfg_.validate();
  if (rc_.T_p != policy_.config().T_p || rc_.T_a != policy_.config().T_a) {
    throw std::invalid_argument("DawrTrainer: runner and policy chunk sizes differ");
  }
}

rl::IterationStats DawrTrainer::iterate() {
  rl::IterationStats stats;
  begin_iteration(runner_, stats);
  const double lr = nd::cosine_lr(cfg_.actor_lr, cfg_.actor_lr_end, iteration_, cfg_.iterations);
  actor_opt_.set_lr(lr);
  stats.lr = lr;
  const envlab::Rollout ro =
      envlab::rollout_chunked(runner_, rl::diffusion_sampler(policy_, diffusion::SampleMode::kExplore),
                              cfg_.steps_per_iter);
  env_steps_ += ro.ticks;
  rl::episode_stats(ro.episodes, stats);
  for (std::size_t t = 0; t < ro.steps(); ++t) {
    for (std::size_t i = 0; i < ro.n_envs; ++i) {
      buffer_.push(ro.obs[t].row(i), ro.chunks[t].row(i), ro.rewards[t][i], ro.dones[t][i] && !ro.truncated[t][i],
                   ro.dones[t][i], ro.final_obs[t].row(i), i);
    }
  }
  const std::size_t fresh = ro.steps() * ro.n_envs;

  // Critic regression onto lambda-returns computed with the current critic.
  const rl::GaeResult td = buffer_td_lambda(buffer_, critic_, cfg_.gamma_env, cfg_.lambda);
  double vloss = 0.0;
  const std::size_t critic_steps = replay_steps(fresh, cfg_.batch_size, cfg_.critic_replay);
  for (std::size_t s = 0; s < critic_steps; ++s) {
    const auto idx = buffer_.sample(cfg_.batch_size, rng_);
    std::vector<double> y(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) y[k] = td.returns[idx[k]];
    critic_opt_.zero_grad();
    nd::Tape tape;
    nd::Var loss = rl::value_loss(critic_.forward(tape, buffer_.obs(idx)), y);
    if (!std::isfinite(loss.item())) throw nd::NonFiniteError("dawr: critic loss diverged");
    tape.backward(loss);
    critic_opt_.step();
    vloss += loss.item() / static_cast<double>(critic_steps);
  }
  stats.value_loss = vloss;

  // Advantages of the refitted critic against the same lambda-returns.
  const std::vector<double> v = critic_.predict(buffer_.obs(buffer_.all()));
  std::vector<double> adv(v.size());
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = td.returns[i] - v[i];
  const std::vector<double> w = wr_weights(adv, cfg_.beta, cfg_.w_max);
  double aloss = 0.0;
  const std::size_t actor_steps = replay_steps(fresh, cfg_.batch_size, cfg_.actor_replay);
  for (std::size_t s = 0; s < actor_steps; ++s) {
    const auto idx = buffer_.sample(cfg_.batch_size, rng_);
    std::vector<double> wb(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) wb[k] = w[idx[k]];
    aloss += weighted_step(policy_, actor_opt_, buffer_.obs(idx), buffer_.actions(idx), wb, rng_) /
             static_cast<double>(actor_steps);
  }
  stats.actor_loss = aloss;
  stats.actor_epochs = static_cast<int>(actor_steps);
  end_iteration(stats);
  return stats;
}

envlab::EvalSummary DawrTrainer::evaluate(std::size_t n_episodes) const {
  envlab::RunnerConfig rc = rc_;
  rc.seed = nd::derive_seed(seed_, 3);
  return rl::evaluate_diffusion(policy_, norm_, rc, n_episodes, runner_.band());
}

std::vector<nd::NamedTensor> DawrTrainer::named_parameters() {
  std::vector<nd::NamedTensor> out = policy_.named_parameters();
  for (auto& p : critic_.named_parameters()) out.push_back(p);
  return out;
}

}  // namespace dppo::baselines
