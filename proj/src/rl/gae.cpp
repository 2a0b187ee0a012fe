#include "dppo/rl/gae.hpp"

#include <stdexcept>

namespace dppo::rl {

GaeResult gae(std::span<const double> rewards, std::span<const double> values, std::span<const double> next_values,
              std::span<const std::uint8_t> terminal, std::span<const std::uint8_t> episode_end, double gamma,
              double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || next_values.size() != n || terminal.size() != n || episode_end.size() != n) {
    throw std::invalid_argument("gae: length mismatch");
  }
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double boot = terminal[t] ? 0.0 : next_values[t];
    const double delta = rewards[t] + gamma * boot - values[t];
    next_adv = delta + (episode_end[t] ? 0.0 : gamma * lambda * next_adv);
    out.advantages[t] = next_adv;
    out.returns[t] = next_adv + values[t];
  }
  return out;
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values, std::span<const std::uint8_t> dones,
              double bootstrap, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw std::invalid_argument("gae: length mismatch");
  std::vector<double> next(n);
  for (std::size_t t = 0; t < n; ++t) next[t] = t + 1 < n ? values[t + 1] : bootstrap;
  return gae(rewards, values, next, dones, dones, gamma, lambda);
}

std::vector<double> reward_to_go(std::span<const double> rewards, std::span<const std::uint8_t> dones, double gamma) {
  if (dones.size() != rewards.size()) throw std::invalid_argument("reward_to_go: length mismatch");
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    if (dones[t]) acc = 0.0;
    acc = rewards[t] + gamma * acc;
    out[t] = acc;
  }
  return out;
}

}  // namespace dppo::rl
