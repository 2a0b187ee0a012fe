#include "dppo/rl/on_policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dppo/rl/gae.hpp"
#include "dppo/rl/ppo.hpp"

namespace dppo::rl {

EnvBatch make_env_batch(const envlab::Rollout& ro, const ValueNet& critic, double gamma, double lambda) {
  EnvBatch b;
  b.n_envs = ro.n_envs;
  b.steps = ro.steps();
  const std::size_t n = b.n_envs;
  const std::size_t rows = b.rows();
  if (rows == 0) throw std::invalid_argument("make_env_batch: empty rollout");
  const std::size_t od = ro.obs.front().cols();
  b.obs = nd::Tensor::matrix(rows, od);
  nd::Tensor final_obs = nd::Tensor::matrix(rows, od);
  b.rewards.resize(rows);
  b.terminal.resize(rows);
  b.episode_end.resize(rows);
  for (std::size_t t = 0; t < b.steps; ++t) {
    std::copy(ro.obs[t].storage().begin(), ro.obs[t].storage().end(), b.obs.row(t * n).begin());
    std::copy(ro.final_obs[t].storage().begin(), ro.final_obs[t].storage().end(), final_obs.row(t * n).begin());
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = t * n + i;
      b.rewards[r] = ro.rewards[t][i];
      b.episode_end[r] = ro.dones[t][i];
      b.terminal[r] = ro.dones[t][i] && !ro.truncated[t][i];
    }
  }
  b.episodes = ro.episodes;
  b.values = critic.predict(b.obs);
  b.next_values = critic.predict(final_obs);
  b.advantages.resize(rows);
  b.returns.resize(rows);
  std::vector<double> r(b.steps), v(b.steps), nv(b.steps);
  std::vector<std::uint8_t> term(b.steps), end(b.steps);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < b.steps; ++t) {
      const std::size_t row = t * n + i;
      r[t] = b.rewards[row];
      v[t] = b.values[row];
      nv[t] = b.next_values[row];
      term[t] = b.terminal[row];
      end[t] = b.episode_end[row];
    }
    const GaeResult g = gae(r, v, nv, term, end, gamma, lambda);
    for (std::size_t t = 0; t < b.steps; ++t) {
      b.advantages[t * n + i] = g.advantages[t];
      b.returns[t * n + i] = g.returns[t];
    }
  }
  return b;
}

void episode_stats(const std::vector<envlab::EpisodeRecord>& eps, IterationStats& stats) {
  stats.episodes = eps.size();
  std::size_t top = 0;
  double ret = 0.0;
  for (const auto& e : eps) {
    if (e.event == envlab::Event::kGoalTop) ++top;
    ret += e.reward;
  }
  stats.success_rate = eps.empty() ? 0.0 : static_cast<double>(top) / static_cast<double>(eps.size());
  stats.mean_return = eps.empty() ? 0.0 : ret / static_cast<double>(eps.size());
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, nd::Rng& rng) {
  if (batch_size == 0) throw std::invalid_argument("epoch_batches: batch_size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return out;
}

double fit_critic(ValueNet& critic, nd::Adam& opt, const nd::Tensor& obs, std::span<const double> targets,
                  int epochs, std::size_t batch_size, nd::Rng& rng) {
  if (targets.size() != obs.rows()) throw std::invalid_argument("fit_critic: one target per row required");
  double last = 0.0;
  for (int e = 0; e < epochs; ++e) {
    double total = 0.0;
    const auto batches = epoch_batches(obs.rows(), batch_size, rng);
    for (const auto& idx : batches) {
      std::vector<double> y(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) y[k] = targets[idx[k]];
      opt.zero_grad();
      nd::Tape tape;
      nd::Var loss = value_loss(critic.forward(tape, nd::gather_rows(obs, idx)), y);
      if (!std::isfinite(loss.item())) throw nd::NonFiniteError("critic loss diverged");
      total += loss.item();
      tape.backward(loss);
      opt.step();
    }
    last = total / static_cast<double>(batches.size());
  }
  return last;
}

void Finetuner::train(const IterationHook& hook) {
  while (iteration_ < budget_.iterations && !reached_target_) {
    const IterationStats s = iterate();
    if (hook && !hook(s)) break;
  }
}

void Finetuner::begin_iteration(envlab::VecRunner& runner, IterationStats& stats) const {
  const envlab::NoiseBand before = runner.band();
  runner.set_iteration(iteration_);
  stats.band = runner.band();
  if (stats.band.lo != before.lo || stats.band.hi != before.hi) stats.event = "noise_band";
}

void Finetuner::end_iteration(IterationStats& stats) {
  ++iteration_;
  stats.iteration = iteration_;
  stats.env_steps = env_steps_;
  if (budget_.eval_every > 0 && (iteration_ % budget_.eval_every == 0 || iteration_ == budget_.iterations)) {
    const double s = evaluate(budget_.eval_episodes).success_rate();
    stats.eval_success = s;
    if (budget_.target_success > 0.0 && s >= budget_.target_success) reached_target_ = true;
  }
}

}  // namespace dppo::rl
