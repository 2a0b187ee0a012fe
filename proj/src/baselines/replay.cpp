#include "dppo/baselines/replay.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dppo::baselines {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t obs_dim, std::size_t act_dim)
    : capacity_(capacity), obs_dim_(obs_dim), act_dim_(act_dim) {
  if (capacity == 0 || obs_dim == 0 || act_dim == 0) throw std::invalid_argument("ReplayBuffer: zero size");
  obs_.resize(capacity * obs_dim);
  next_obs_.resize(capacity * obs_dim);
  act_.resize(capacity * act_dim);
  reward_.resize(capacity);
  terminal_.resize(capacity);
  episode_end_.resize(capacity);
  stream_.resize(capacity);
}

std::size_t ReplayBuffer::slot(std::size_t i) const { return (head_ + i) % capacity_; }

void ReplayBuffer::push(std::span<const double> obs, std::span<const double> action, double reward, bool terminal,
                        bool episode_end, std::span<const double> next_obs, std::size_t stream) {
  if (obs.size() != obs_dim_ || next_obs.size() != obs_dim_ || action.size() != act_dim_) {
    throw nd::ShapeError("ReplayBuffer::push: width mismatch");
  }
  std::size_t s;
  if (size_ < capacity_) {
    s = slot(size_);
    ++size_;
  } else {
    s = head_;
    head_ = (head_ + 1) % capacity_;
  }
  std::copy(obs.begin(), obs.end(), obs_.begin() + static_cast<std::ptrdiff_t>(s * obs_dim_));
  std::copy(next_obs.begin(), next_obs.end(), next_obs_.begin() + static_cast<std::ptrdiff_t>(s * obs_dim_));
  std::copy(action.begin(), action.end(), act_.begin() + static_cast<std::ptrdiff_t>(s * act_dim_));
  reward_[s] = reward;
  terminal_[s] = terminal;
  episode_end_[s] = episode_end;
  stream_[s] = stream;
  ++pushed_;
}

ReplayBuffer::Entry ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("ReplayBuffer::at: index " + std::to_string(i));
  const std::size_t s = slot(i);
  Entry e;
  e.obs = {obs_.data() + s * obs_dim_, obs_dim_};
  e.next_obs = {next_obs_.data() + s * obs_dim_, obs_dim_};
  e.action = {act_.data() + s * act_dim_, act_dim_};
  e.reward = reward_[s];
  e.terminal = terminal_[s];
  e.episode_end = episode_end_[s];
  e.stream = stream_[s];
  return e;
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t n, nd::Rng& rng) const {
  if (empty()) throw std::logic_error("ReplayBuffer::sample: buffer is empty");
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(size_) - 1));
  return out;
}

nd::Tensor ReplayBuffer::gather(const std::vector<double>& src, std::size_t width,
                                std::span<const std::size_t> idx) const {
  nd::Tensor out = nd::Tensor::matrix(idx.size(), width);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= size_) throw std::out_of_range("ReplayBuffer: index " + std::to_string(idx[k]));
    const auto* p = src.data() + slot(idx[k]) * width;
    std::copy(p, p + width, out.row(k).begin());
  }
  return out;
}

nd::Tensor ReplayBuffer::obs(std::span<const std::size_t> idx) const { return gather(obs_, obs_dim_, idx); }
nd::Tensor ReplayBuffer::actions(std::span<const std::size_t> idx) const { return gather(act_, act_dim_, idx); }
nd::Tensor ReplayBuffer::next_obs(std::span<const std::size_t> idx) const { return gather(next_obs_, obs_dim_, idx); }

std::vector<std::size_t> ReplayBuffer::all() const {
  std::vector<std::size_t> out(size_);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

}  // namespace dppo::baselines
