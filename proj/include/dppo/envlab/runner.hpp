#pragma once

#include <any>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dppo/envlab/avoid.hpp"
#include "dppo/envlab/dataset.hpp"
#include "dppo/envlab/demos.hpp"
#include "dppo/envlab/normalizer.hpp"
#include "dppo/nd/rng.hpp"
#include "dppo/nd/tensor.hpp"

namespace dppo::envlab {

// Per-tick action noise: magnitude ~ U(lo, hi) with a random sign per
// dimension, added to the normalized action.
struct NoiseBand {
  double lo = 0.0;
  double hi = 0.0;
  bool active() const { return hi > 0.0; }
};

struct NoiseInjection {
  bool enabled = false;
  double start_iter = 5.0;
  double full_iter = 10.0;
  double lo = 0.1;
  double hi = 0.2;
};

// (0, 0) before start_iter, a linear ramp up to (lo, hi) at full_iter, constant after.
NoiseBand inject_action_noise(const NoiseInjection& cfg, double iteration);

struct RunnerConfig {
  std::size_t n_envs = 50;
  std::size_t T_a = 4;
  std::size_t T_p = 4;
  AvoidConfig env;
  std::uint64_t seed = 0;
  NoiseInjection noise;
};

// Chunk proposal for every row of a normalized observation batch. Row i must
// draw randomness only from rngs[i].
struct ChunkDecision {
  nd::Tensor chunk;  // [N, T_p * 2], normalized
  std::any payload;  // sampler-specific record, e.g. a denoising trace
};
using ChunkSampler = std::function<ChunkDecision(const nd::Tensor& obs, std::span<nd::Rng> rngs)>;

// Oracle that replays a route's nominal waypoints as chunks. Routes are
// x-monotone, so the current waypoint is the first one still ahead.
ChunkSampler scripted_sampler(const Normalizer& norm, std::size_t T_p, Route route = {2, 2}, double max_step = 0.04);

struct ChunkOutcome {
  std::vector<double> reward;  // sum of per-tick rewards over executed ticks
  std::vector<std::uint8_t> done;
  std::vector<std::uint8_t> truncated;
  std::vector<Event> event;
  std::vector<std::size_t> ticks;  // ticks actually executed
  nd::Tensor final_obs;  // normalized observation reached, before any auto-reset
};

// N independent Avoid environments executing action chunks. Finished
// environments reset automatically.
class VecRunner {
 public:
  VecRunner(RunnerConfig cfg, Normalizer norm);

  const RunnerConfig& config() const { return cfg_; }
  const Normalizer& normalizer() const { return norm_; }
  std::size_t size() const { return envs_.size(); }

  nd::Tensor observe() const;
  std::span<nd::Rng> policy_rngs() { return policy_rngs_; }

  // Executes the first T_a actions of each env's chunk.
  ChunkOutcome execute(const nd::Tensor& chunk);

  void set_iteration(double iteration) { band_ = inject_action_noise(cfg_.noise, iteration); }
  void set_band(NoiseBand band) { band_ = band; }
  NoiseBand band() const { return band_; }

  // Episodes completed since the last call.
  std::vector<EpisodeRecord> take_finished();
  void reset_all();

 private:
  RunnerConfig cfg_;
  Normalizer norm_;
  NoiseBand band_;
  std::vector<AvoidEnv> envs_;
  std::vector<nd::Rng> noise_rngs_;
  std::vector<nd::Rng> policy_rngs_;
  std::vector<EpisodeRecord> current_;
  std::vector<EpisodeRecord> finished_;
};

struct Rollout {
  std::size_t n_envs = 0;
  std::vector<nd::Tensor> obs;  // per chunk step, [N, 4] normalized
  std::vector<nd::Tensor> chunks;
  std::vector<std::vector<double>> rewards;
  std::vector<std::vector<std::uint8_t>> dones;
  std::vector<std::vector<std::uint8_t>> truncated;
  std::vector<nd::Tensor> final_obs;
  std::vector<std::any> payloads;
  std::vector<EpisodeRecord> episodes;
  std::size_t ticks = 0;
  std::size_t steps() const { return obs.size(); }
};

Rollout rollout_chunked(VecRunner& runner, const ChunkSampler& sampler, std::size_t n_steps);

struct EvalSummary {
  std::size_t episodes = 0;
  std::size_t goal_top = 0;
  std::size_t goal_other = 0;
  std::size_t collision = 0;
  std::size_t timeout = 0;
  double mean_length = 0.0;
  std::vector<EpisodeRecord> records;

  double success_rate() const { return episodes ? static_cast<double>(goal_top) / episodes : 0.0; }
  double reach_rate() const { return episodes ? static_cast<double>(goal_top + goal_other) / episodes : 0.0; }
};

// Runs exactly n_episodes fresh episodes, one per environment, until each
// ends, under a fixed injected-noise band.
EvalSummary run_episodes(const RunnerConfig& cfg, const Normalizer& norm, const ChunkSampler& sampler,
                         std::size_t n_episodes, NoiseBand band = {});

}  // namespace dppo::envlab
