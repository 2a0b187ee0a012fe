#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dppo/nd/rng.hpp"
#include "dppo/nd/tensor.hpp"

namespace dppo::baselines {

// Fixed-capacity FIFO of environment transitions. Index 0 is the oldest
// entry; once full, every push evicts it.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t obs_dim, std::size_t act_dim);

  struct Entry {
    std::span<const double> obs;
    std::span<const double> action;
    std::span<const double> next_obs;  // state reached, before any reset
    double reward = 0.0;
    bool terminal = false;
    bool episode_end = false;
    std::size_t stream = 0;  // which environment produced it
  };

  void push(std::span<const double> obs, std::span<const double> action, double reward, bool terminal,
            bool episode_end, std::span<const double> next_obs, std::size_t stream);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }
  // Pushes since construction, evicted ones included.
  std::uint64_t pushed() const { return pushed_; }

  Entry at(std::size_t i) const;
  // Uniform draw with replacement.
  std::vector<std::size_t> sample(std::size_t n, nd::Rng& rng) const;

  nd::Tensor obs(std::span<const std::size_t> idx) const;
  nd::Tensor actions(std::span<const std::size_t> idx) const;
  nd::Tensor next_obs(std::span<const std::size_t> idx) const;
  // All entries, oldest first.
  std::vector<std::size_t> all() const;

 private:
  std::size_t slot(std::size_t i) const;
  nd::Tensor gather(const std::vector<double>& src, std::size_t width, std::span<const std::size_t> idx) const;

  std::size_t capacity_;
  std::size_t obs_dim_;
  std::size_t act_dim_;
  std::size_t head_ = 0;  // slot of the oldest entry
  std::size_t size_ = 0;
  std::uint64_t pushed_ = 0;
  std::vector<double> obs_, act_, next_obs_, reward_;
  std::vector<std::uint8_t> terminal_, episode_end_;
  std::vector<std::size_t> stream_;
};

}  // namespace dppo::baselines
