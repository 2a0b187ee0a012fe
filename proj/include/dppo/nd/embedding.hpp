#pragma once

#include <cstddef>
#include <span>

#include "dppo/nd/tensor.hpp"

namespace dppo::nd {

// Sinusoidal embedding of integer timesteps: the first half of the row holds
// sin(k * f_i), the second half cos(k * f_i), with f_i = 10000^(-i / (half - 1)).
class TimeEmbedding {
 public:
  explicit TimeEmbedding(std::size_t dim = 16);

  std::size_t dim() const { return dim_; }
  void embed_into(double k, std::span<double> out) const;
  // One row per entry of `ks`.
  Tensor embed(std::span<const int> ks) const;

 private:
  std::size_t dim_;
};

}  // namespace dppo::nd
