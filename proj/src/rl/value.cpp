#include "dppo/rl/value.hpp"

namespace dppo::rl {

ValueNet::ValueNet(std::size_t obs_dim, std::vector<std::size_t> hidden, std::uint64_t seed, nd::Activation act) {
  nd::Rng rng(seed);
  net_ = nd::MlpNet(nd::MlpSpec{obs_dim, std::move(hidden), 1, act, false}, rng);
}

nd::Var ValueNet::forward(nd::Tape& tape, const nd::Tensor& obs) { return net_.forward(tape, tape.constant(obs)); }

std::vector<double> ValueNet::predict(const nd::Tensor& obs) const {
  const nd::Tensor v = net_.infer(obs);
  return std::vector<double>(v.storage().begin(), v.storage().end());
}

}  // namespace dppo::rl
