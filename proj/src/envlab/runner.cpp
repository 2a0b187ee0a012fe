#include "dppo/envlab/runner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dppo::envlab {

ChunkSampler scripted_sampler(const Normalizer& norm, std::size_t T_p, Route route, double max_step) {
  auto wps = route_waypoints(route);
  return [norm, T_p, wps, max_step](const nd::Tensor& obs, std::span<nd::Rng>) {
    nd::Tensor raw = obs;
    norm.denormalize_obs(raw.data());
    nd::Tensor chunk = nd::Tensor::matrix(obs.rows(), 2 * T_p);
    for (std::size_t i = 0; i < obs.rows(); ++i) {
      double px = raw(i, 0), py = raw(i, 1);
      std::size_t w = 0;
      for (std::size_t t = 0; t < T_p; ++t) {
        while (w + 1 < wps.size() && wps[w][0] <= px + 1e-9) ++w;
        const double dx = wps[w][0] - px, dy = wps[w][1] - py;
        const double d = std::hypot(dx, dy);
        const double s = d > max_step ? max_step / d : 1.0;
        chunk(i, 2 * t) = wps[w][0];
        chunk(i, 2 * t + 1) = wps[w][1];
        px += s * dx;
        py += s * dy;
      }
    }
    norm.normalize_act(chunk.data());
    return ChunkDecision{chunk, {}};
  };
}

NoiseBand inject_action_noise(const NoiseInjection& cfg, double iteration) {
  if (!cfg.enabled || iteration < cfg.start_iter) return {};
  const double span = cfg.full_iter - cfg.start_iter;
  const double frac = span <= 0.0 ? 1.0 : std::min(1.0, (iteration - cfg.start_iter) / span);
  return {frac * cfg.lo, frac * cfg.hi};
}

namespace {

EpisodeRecord fresh_record(const AvoidEnv& env) {
  EpisodeRecord r;
  r.positions = {env.position()[0], env.position()[1]};
  return r;
}

}  // namespace

VecRunner::VecRunner(RunnerConfig cfg, Normalizer norm) : cfg_(std::move(cfg)), norm_(std::move(norm)) {
  if (cfg_.n_envs < 1) throw std::invalid_argument("VecRunner: need at least one env");
  if (cfg_.T_a < 1 || cfg_.T_a > cfg_.T_p) throw std::invalid_argument("VecRunner: need 1 <= T_a <= T_p");
  for (std::size_t i = 0; i < cfg_.n_envs; ++i) {
    envs_.emplace_back(cfg_.env);
    noise_rngs_.emplace_back(nd::derive_seed(cfg_.seed, 2 * i));
    policy_rngs_.emplace_back(nd::derive_seed(cfg_.seed, 2 * i + 1));
    current_.push_back(fresh_record(envs_.back()));
  }
}

nd::Tensor VecRunner::observe() const {
  nd::Tensor obs = nd::Tensor::matrix(envs_.size(), 4);
  for (std::size_t i = 0; i < envs_.size(); ++i) {
    const Obs o = envs_[i].observation();
    std::copy(o.begin(), o.end(), obs.row(i).begin());
  }
  norm_.normalize_obs(obs.data());
  return obs;
}

ChunkOutcome VecRunner::execute(const nd::Tensor& chunk) {
  const std::size_t n = envs_.size();
  if (chunk.rows() != n || chunk.cols() != 2 * cfg_.T_p) {
    throw nd::ShapeError("VecRunner::execute: chunk shape " + nd::shape_string(chunk.shape()));
  }
  chunk.require_finite("action chunk");
  ChunkOutcome out;
  out.reward.assign(n, 0.0);
  out.done.assign(n, 0);
  out.truncated.assign(n, 0);
  out.event.assign(n, Event::kNone);
  out.ticks.assign(n, 0);
  out.final_obs = nd::Tensor::matrix(n, 4);
  for (std::size_t i = 0; i < n; ++i) {
    AvoidEnv& env = envs_[i];
    for (std::size_t t = 0; t < cfg_.T_a; ++t) {
      double a[2] = {chunk(i, 2 * t), chunk(i, 2 * t + 1)};
      if (band_.active()) {
        for (double& v : a) {
          const double mag = noise_rngs_[i].uniform(band_.lo, band_.hi);
          v += noise_rngs_[i].uniform() < 0.5 ? -mag : mag;
        }
      }
      norm_.denormalize_act(a);
      const StepResult r = env.step(a[0], a[1]);
      ++out.ticks[i];
      EpisodeRecord& rec = current_[i];
      rec.targets.push_back(std::clamp(a[0], 0.0, 1.0));
      rec.targets.push_back(std::clamp(a[1], 0.0, 1.0));
      rec.positions.push_back(r.obs[0]);
      rec.positions.push_back(r.obs[1]);
      rec.reward += r.reward;
      out.reward[i] += r.reward;
      if (r.done) {
        out.done[i] = 1;
        out.truncated[i] = r.truncated ? 1 : 0;
        out.event[i] = r.event;
        rec.event = r.event;
        break;
      }
    }
    const Obs o = env.observation();
    std::copy(o.begin(), o.end(), out.final_obs.row(i).begin());
    if (out.done[i]) {
      finished_.push_back(std::move(current_[i]));
      env.reset();
      current_[i] = fresh_record(env);
    }
  }
  norm_.normalize_obs(out.final_obs.data());
  return out;
}

std::vector<EpisodeRecord> VecRunner::take_finished() {
  std::vector<EpisodeRecord> out;
  out.swap(finished_);
  return out;
}

void VecRunner::reset_all() {
  for (std::size_t i = 0; i < envs_.size(); ++i) {
    envs_[i].reset();
    current_[i] = fresh_record(envs_[i]);
  }
  finished_.clear();
}

Rollout rollout_chunked(VecRunner& runner, const ChunkSampler& sampler, std::size_t n_steps) {
  Rollout ro;
  ro.n_envs = runner.size();
  for (std::size_t s = 0; s < n_steps; ++s) {
    nd::Tensor obs = runner.observe();
    ChunkDecision dec = sampler(obs, runner.policy_rngs());
    ChunkOutcome oc = runner.execute(dec.chunk);
    for (std::size_t k : oc.ticks) ro.ticks += k;
    ro.obs.push_back(std::move(obs));
    ro.chunks.push_back(std::move(dec.chunk));
    ro.payloads.push_back(std::move(dec.payload));
    ro.rewards.push_back(std::move(oc.reward));
    ro.dones.push_back(std::move(oc.done));
    ro.truncated.push_back(std::move(oc.truncated));
    ro.final_obs.push_back(std::move(oc.final_obs));
  }
  ro.episodes = runner.take_finished();
  return ro;
}

EvalSummary run_episodes(const RunnerConfig& cfg, const Normalizer& norm, const ChunkSampler& sampler,
                         std::size_t n_episodes, NoiseBand band) {
  RunnerConfig rc = cfg;
  rc.n_envs = n_episodes;
  VecRunner runner(rc, norm);
  runner.set_band(band);
  std::vector<std::uint8_t> active(n_episodes, 1);
  std::vector<EpisodeRecord> records(n_episodes);
  std::size_t remaining = n_episodes;
  const std::size_t max_chunks = static_cast<std::size_t>(cfg.env.horizon) / cfg.T_a + 2;
  for (std::size_t step = 0; step < max_chunks && remaining > 0; ++step) {
    const nd::Tensor obs = runner.observe();
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n_episodes; ++i) {
      if (active[i]) rows.push_back(i);
    }
    // Only live rows are sampled; each keeps drawing from its own rng.
    nd::Tensor sub = nd::Tensor::matrix(rows.size(), obs.cols());
    std::vector<nd::Rng> sub_rngs;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::copy(obs.row(rows[r]).begin(), obs.row(rows[r]).end(), sub.row(r).begin());
      sub_rngs.push_back(runner.policy_rngs()[rows[r]]);
    }
    ChunkDecision part = sampler(sub, sub_rngs);
    ChunkDecision dec{nd::Tensor::matrix(n_episodes, 2 * cfg.T_p), {}};
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::copy(part.chunk.row(r).begin(), part.chunk.row(r).end(), dec.chunk.row(rows[r]).begin());
      runner.policy_rngs()[rows[r]] = sub_rngs[r];
    }
    ChunkOutcome oc = runner.execute(dec.chunk);
    auto fin = runner.take_finished();
    std::size_t f = 0;
    for (std::size_t i = 0; i < n_episodes; ++i) {
      if (!oc.done[i]) continue;
      if (active[i]) {
        records[i] = std::move(fin[f]);
        active[i] = 0;
        --remaining;
      }
      ++f;
    }
  }
  if (remaining > 0) throw std::logic_error("run_episodes: episodes outlived the horizon");
  EvalSummary sum;
  sum.episodes = n_episodes;
  double len = 0.0;
  for (EpisodeRecord& r : records) {
    switch (r.event) {
      case Event::kGoalTop:
        ++sum.goal_top;
        break;
      case Event::kGoalOther:
        ++sum.goal_other;
        break;
      case Event::kCollision:
        ++sum.collision;
        break;
      default:
        ++sum.timeout;
        break;
    }
    len += static_cast<double>(r.length());
  }
  sum.mean_length = len / static_cast<double>(n_episodes);
  sum.records = std::move(records);
  return sum;
}

}  // namespace dppo::envlab
