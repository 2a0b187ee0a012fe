#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dppo::rl {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values
};

// Generalized advantage estimation over one environment's step sequence.
//   delta_t = r_t + gamma * (1 - terminal_t) * next_values[t] - values[t]
//   A_t     = delta_t + gamma * lambda * (1 - episode_end_t) * A_{t+1}
// next_values[t] is the value of the state reached by step t before any reset.
// terminal marks true terminations (no bootstrap); episode_end marks every
// episode boundary, terminal or truncated, and cuts the trace.
GaeResult gae(std::span<const double> rewards, std::span<const double> values, std::span<const double> next_values,
              std::span<const std::uint8_t> terminal, std::span<const std::uint8_t> episode_end, double gamma,
              double lambda);

// Single-sequence convenience form: all dones are true terminations and the
// state after the final step has value `bootstrap`.
GaeResult gae(std::span<const double> rewards, std::span<const double> values, std::span<const std::uint8_t> dones,
              double bootstrap, double gamma, double lambda);

// Discounted reward-to-go within each episode, restarting after every done.
std::vector<double> reward_to_go(std::span<const double> rewards, std::span<const std::uint8_t> dones, double gamma);

}  // namespace dppo::rl
