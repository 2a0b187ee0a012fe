#include "dppo/diffusion/bc.hpp"

#include <cmath>
#include <stdexcept>

#include "dppo/nd/ops.hpp"

namespace dppo::diffusion {

BcSample make_bc_sample(const nd::Tensor& actions, const NoiseSchedule& sched, nd::Rng& rng) {
  if (actions.rows() == 0) throw std::invalid_argument("bc: empty batch");
  BcSample s{nd::Tensor(actions.shape()), nd::Tensor(actions.shape()), std::vector<int>(actions.rows())};
  for (std::size_t i = 0; i < actions.rows(); ++i) {
    const int k = static_cast<int>(rng.uniform_int(1, sched.K));
    s.levels[i] = k;
    const double a = std::sqrt(sched.alpha_bar[k]);
    const double b = std::sqrt(1.0 - sched.alpha_bar[k]);
    for (std::size_t d = 0; d < actions.cols(); ++d) {
      const double e = rng.normal();
      s.eps(i, d) = e;
      s.noisy(i, d) = a * actions(i, d) + b * e;
    }
  }
  return s;
}

nd::Var noise_regression_loss(nd::Tape& tape, NoisePredictor& net, const nd::Tensor& obs, const BcSample& sample,
                              std::span<const double> weights) {
  if (sample.noisy.rows() == 0) throw std::invalid_argument("bc: empty batch");
  nd::Var pred = net.forward(tape, sample.noisy, obs, sample.levels);
  nd::Var per_row = nd::row_sum(nd::square(nd::sub(tape.constant(sample.eps), pred)));
  if (!weights.empty()) per_row = nd::scale_rows(per_row, weights);
  return nd::mean(per_row);
}

nd::Var bc_loss(nd::Tape& tape, NoisePredictor& net, const nd::Tensor& obs, const nd::Tensor& actions,
                const NoiseSchedule& sched, nd::Rng& rng) {
  return noise_regression_loss(tape, net, obs, make_bc_sample(actions, sched, rng));
}

}  // namespace dppo::diffusion
