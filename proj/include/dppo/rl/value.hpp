#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dppo/nd/mlp.hpp"

namespace dppo::rl {

// State-value critic V(s). It only ever sees the environment observation.
class ValueNet {
 public:
  ValueNet() = default;
  ValueNet(std::size_t obs_dim, std::vector<std::size_t> hidden, std::uint64_t seed,
           nd::Activation act = nd::Activation::kTanh);

  nd::Var forward(nd::Tape& tape, const nd::Tensor& obs);  // [B, 1]
  std::vector<double> predict(const nd::Tensor& obs) const;

  nd::MlpNet& net() { return net_; }
  const nd::MlpNet& net() const { return net_; }
  std::vector<nd::NamedTensor> named_parameters(const std::string& prefix = "value.") {
    return net_.named_parameters(prefix);
  }

 private:
  nd::MlpNet net_;
};

}  // namespace dppo::rl
