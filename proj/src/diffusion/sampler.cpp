#include "dppo/diffusion/sampler.hpp"

#include <algorithm>
#include <stdexcept>

#include "dppo/nd/ops.hpp"

namespace dppo::diffusion {

using nd::Tensor;

DenoiseTrace sample_chunk(const DiffusionPolicy& policy, const Tensor& obs, std::span<nd::Rng> rngs,
                          SampleMode mode, const Tensor* initial) {
  const std::size_t batch = obs.rows();
  const std::size_t dim = policy.config().chunk_dim();
  if (rngs.size() != batch) throw nd::ShapeError("sample_chunk: need one rng per row");
  obs.require_finite("sample_chunk observation");
  const auto& chain = policy.chain(mode);
  const int n = static_cast<int>(chain.size());

  DenoiseTrace tr;
  tr.x.resize(n + 1);
  tr.mean.resize(n);
  tr.sigma.resize(n);
  tr.prob_sigma.resize(n);
  tr.logprob = Tensor::matrix(batch, n);

  if (initial != nullptr) {
    if (initial->shape() != nd::Shape{batch, dim}) throw nd::ShapeError("sample_chunk: initial noise shape");
    tr.x[n] = *initial;
  } else {
    tr.x[n] = Tensor::matrix(batch, dim);
    for (std::size_t i = 0; i < batch; ++i) {
      for (double& v : tr.x[n].row(i)) v = rngs[i].normal();
    }
  }

  std::vector<int> levels(batch);
  for (int j = n - 1; j >= 0; --j) {
    const Transition& t = chain[j];
    std::fill(levels.begin(), levels.end(), t.level);
    const Tensor eps = policy.net_for_step(j).infer(tr.x[j + 1], obs, levels);
    const std::vector<double> ca(batch, t.c_a);
    const std::vector<double> ce(batch, t.c_eps);
    tr.mean[j] = nd::eval::affine_mix(tr.x[j + 1], ca, eps, ce);
    tr.sigma[j] = policy.sample_sigma(j, mode);
    tr.prob_sigma[j] = policy.prob_sigma(j);
    Tensor next = tr.mean[j];
    if (tr.sigma[j] > 0.0) {
      for (std::size_t i = 0; i < batch; ++i) {
        for (double& v : next.row(i)) v += tr.sigma[j] * rngs[i].normal();
      }
    }
    next.require_finite("denoising step " + std::to_string(j));
    for (std::size_t i = 0; i < batch; ++i) {
      tr.logprob(i, j) = nd::eval::gaussian_logprob(next.row(i), tr.mean[j].row(i), tr.prob_sigma[j]);
    }
    tr.x[j] = std::move(next);
  }
  tr.action = tr.x[0];
  for (double& v : tr.action.data()) v = std::clamp(v, -1.0, 1.0);
  return tr;
}

namespace {

struct RowCoefs {
  std::vector<int> levels;
  std::vector<double> ca, ce, sigma;
};

RowCoefs row_coefs(const DiffusionPolicy& policy, std::span<const int> steps, std::size_t rows) {
  if (steps.size() != rows) throw nd::ShapeError("step_logprob: one step index per row required");
  const auto& chain = policy.chain(SampleMode::kExplore);
  RowCoefs rc;
  for (int j : steps) {
    if (j < 0 || j >= static_cast<int>(chain.size())) throw std::out_of_range("step_logprob: bad step index");
    rc.levels.push_back(chain[j].level);
    rc.ca.push_back(chain[j].c_a);
    rc.ce.push_back(chain[j].c_eps);
    rc.sigma.push_back(policy.prob_sigma(j));
  }
  return rc;
}

}  // namespace

nd::Var step_logprob(nd::Tape& tape, DiffusionPolicy& policy, const Tensor& obs, const Tensor& x_in,
                     const Tensor& x_out, std::span<const int> steps) {
  const RowCoefs rc = row_coefs(policy, steps, x_in.rows());
  const int kp = policy.config().K_prime;
  const bool tail = std::all_of(steps.begin(), steps.end(), [kp](int j) { return j < kp; });
  const bool frozen = std::none_of(steps.begin(), steps.end(), [kp](int j) { return j < kp; });
  nd::Var eps;
  if (!policy.is_split()) {
    eps = policy.base().forward(tape, x_in, obs, rc.levels);
  } else if (tail) {
    eps = policy.finetuned().forward(tape, x_in, obs, rc.levels);
  } else if (frozen) {
    eps = policy.base().forward_frozen(tape, x_in, obs, rc.levels);
  } else {
    throw std::invalid_argument("step_logprob: batch mixes fine-tuned and frozen steps");
  }
  nd::Var mean = nd::affine_mix(x_in, rc.ca, eps, rc.ce);
  return nd::gaussian_logprob_rows(mean, x_out, rc.sigma);
}

std::vector<double> step_logprob_eval(const DiffusionPolicy& policy, const Tensor& obs, const Tensor& x_in,
                                      const Tensor& x_out, std::span<const int> steps) {
  const RowCoefs rc = row_coefs(policy, steps, x_in.rows());
  std::vector<double> out(x_in.rows());
  // Rows are independent, so evaluate each with the network owning its step.
  for (std::size_t i = 0; i < x_in.rows(); ++i) {
    const Tensor xi({1, x_in.cols()}, std::vector<double>(x_in.row(i).begin(), x_in.row(i).end()));
    const Tensor oi({1, obs.cols()}, std::vector<double>(obs.row(i).begin(), obs.row(i).end()));
    const int lv = rc.levels[i];
    const Tensor eps = policy.net_for_step(steps[i]).infer(xi, oi, std::span<const int>(&lv, 1));
    const Tensor mean = nd::eval::affine_mix(xi, std::span<const double>(&rc.ca[i], 1), eps,
                                             std::span<const double>(&rc.ce[i], 1));
    out[i] = nd::eval::gaussian_logprob(x_out.row(i), mean.row(0), rc.sigma[i]);
  }
  return out;
}

}  // namespace dppo::diffusion
