#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dppo/envlab/runner.hpp"
#include "dppo/nd/adam.hpp"
#include "dppo/rl/value.hpp"

namespace dppo::rl {

// Environment-level view of a chunked rollout. Row t * N + i holds env i at
// chunk step t.
struct EnvBatch {
  std::size_t n_envs = 0;
  std::size_t steps = 0;
  nd::Tensor obs;
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminal;     // ended by collision or goal
  std::vector<std::uint8_t> episode_end;  // any episode boundary
  std::vector<double> values;
  std::vector<double> next_values;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<envlab::EpisodeRecord> episodes;  // finished during the rollout

  std::size_t rows() const { return n_envs * steps; }
};

// Flattens the rollout and fills values, advantages and returns by GAE run
// separately along each env's sequence. Truncated episodes bootstrap from the
// value of their final state.
EnvBatch make_env_batch(const envlab::Rollout& ro, const ValueNet& critic, double gamma, double lambda);

struct IterationStats {
  int iteration = 0;
  std::size_t env_steps = 0;  // cumulative executed ticks
  std::size_t episodes = 0;   // episodes finished during this iteration
  double success_rate = 0.0;  // top-mode share of those episodes
  double mean_return = 0.0;
  double actor_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double lr = 0.0;
  int actor_epochs = 0;
  std::optional<double> eval_success;
  envlab::NoiseBand band;
  std::string event;
};

using IterationHook = std::function<bool(const IterationStats&)>;

// Fills episodes, success_rate and mean_return from finished episodes.
void episode_stats(const std::vector<envlab::EpisodeRecord>& eps, IterationStats& stats);

// Shuffled minibatch row indices for one epoch; the last batch may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, nd::Rng& rng);

// Shared driver of the fine-tuning methods: iteration counting, periodic
// evaluation, the success-target stop and the injected-noise schedule.
class Finetuner {
 public:
  struct Budget {
    int iterations = 0;
    int eval_every = 0;  // 0 disables periodic evaluation
    std::size_t eval_episodes = 100;
    double target_success = 0.0;  // <= 0: never stop early
  };

  virtual ~Finetuner() = default;

  // One collect-and-update round.
  virtual IterationStats iterate() = 0;
  // Fresh episodes with the evaluation policy under the current noise band.
  virtual envlab::EvalSummary evaluate(std::size_t n_episodes) const = 0;
  // Every tensor a checkpoint of the method should hold.
  virtual std::vector<nd::NamedTensor> named_parameters() = 0;

  int iteration() const { return iteration_; }
  std::size_t env_steps() const { return env_steps_; }
  bool reached_target() const { return reached_target_; }
  // Runs until the iteration budget, the target success, or the hook returning false.
  void train(const IterationHook& hook = {});

 protected:
  explicit Finetuner(Budget budget) : budget_(budget) {}

  // Moves the runner to the current iteration's noise band and records it.
  void begin_iteration(envlab::VecRunner& runner, IterationStats& stats) const;
  // Counts the iteration and runs the periodic evaluation.
  void end_iteration(IterationStats& stats);

  Budget budget_;
  int iteration_ = 0;
  std::size_t env_steps_ = 0;
  bool reached_target_ = false;
};

// `epochs` passes of shuffled minibatch regression of the critic onto
// `targets`. Returns the mean minibatch loss of the last epoch.
double fit_critic(ValueNet& critic, nd::Adam& opt, const nd::Tensor& obs, std::span<const double> targets,
                  int epochs, std::size_t batch_size, nd::Rng& rng);

}  // namespace dppo::rl
