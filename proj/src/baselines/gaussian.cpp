#include "dppo/baselines/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dppo::baselines {

void GaussianConfig::validate() const {
  if (obs_dim == 0 || act_dim == 0 || T_p == 0) throw std::invalid_argument("gaussian: zero dimension");
  if (T_a == 0 || T_a > T_p) throw std::invalid_argument("gaussian: need 1 <= T_a <= T_p");
  if (!(sigma_min > 0) || !(sigma_max >= sigma_min)) throw std::invalid_argument("gaussian: bad sigma range");
  if (!(sigma_init >= sigma_min && sigma_init <= sigma_max)) {
    throw std::invalid_argument("gaussian: sigma_init outside [sigma_min, sigma_max]");
  }
  if (!(sample_clip > 0)) throw std::invalid_argument("gaussian: sample_clip must be positive");
}

namespace {

GaussianConfig checked(GaussianConfig c) {
  c.validate();
  return c;
}

nd::MlpNet make_mean(const GaussianConfig& c, std::uint64_t seed) {
  nd::Rng rng(seed);
  return nd::MlpNet({c.obs_dim, c.hidden, c.chunk_dim(), c.activation, false}, rng);
}

}  // namespace

GaussianPolicy::GaussianPolicy(GaussianConfig cfg, std::uint64_t seed)
    : cfg_(checked(std::move(cfg))), mean_(make_mean(cfg_, seed)), log_std_(nd::Tensor::matrix(1, cfg_.chunk_dim())) {
  set_sigma(cfg_.sigma_init);
}

nd::Var GaussianPolicy::mean(nd::Tape& tape, const nd::Tensor& obs) { return mean_.forward(tape, tape.constant_ref(obs)); }

nd::Tensor GaussianPolicy::mean_eval(const nd::Tensor& obs) const { return mean_.infer(obs); }

std::vector<double> GaussianPolicy::sigma() const {
  std::vector<double> s(log_std_.size());
  for (std::size_t d = 0; d < s.size(); ++d) s[d] = std::exp(log_std_[d]);
  return s;
}

nd::Var GaussianPolicy::logprob(nd::Tape& tape, const nd::Tensor& obs, const nd::Tensor& actions) {
  return nd::gaussian_logprob_rows(mean(tape, obs), actions, tape.parameter(log_std_));
}

std::vector<double> GaussianPolicy::logprob_eval(const nd::Tensor& obs, const nd::Tensor& actions) const {
  nd::Tape tape;
  nd::Var m = mean_.forward_frozen(tape, tape.constant_ref(obs));
  const nd::Tensor& lp = nd::gaussian_logprob_rows(m, actions, tape.constant_ref(log_std_)).value();
  return {lp.data().begin(), lp.data().end()};
}

nd::Tensor GaussianPolicy::sample(const nd::Tensor& obs, std::span<nd::Rng> rngs) const {
  if (rngs.size() != obs.rows()) throw nd::ShapeError("GaussianPolicy::sample: one rng per row required");
  nd::Tensor out = mean_eval(obs);
  const std::vector<double> s = sigma();
  const double c = cfg_.sample_clip;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    for (std::size_t d = 0; d < row.size(); ++d) row[d] += s[d] * std::clamp(rngs[i].normal(), -c, c);
  }
  return out;
}

void GaussianPolicy::clamp_log_std() {
  const double lo = std::log(cfg_.sigma_min), hi = std::log(cfg_.sigma_max);
  for (double& x : log_std_.data()) x = std::clamp(x, lo, hi);
}

void GaussianPolicy::set_sigma(double sigma) {
  if (!(sigma > 0)) throw std::invalid_argument("GaussianPolicy::set_sigma: sigma must be positive");
  for (double& x : log_std_.data()) x = std::log(sigma);
  clamp_log_std();
}

std::vector<nd::NamedTensor> GaussianPolicy::named_parameters(const std::string& prefix) {
  std::vector<nd::NamedTensor> out = mean_.named_parameters(prefix + "mean.");
  out.push_back({prefix + "log_std", &log_std_});
  return out;
}

nd::Var gaussian_bc_loss(nd::Tape& tape, GaussianPolicy& policy, const nd::Tensor& obs, const nd::Tensor& actions) {
  nd::Var diff = nd::sub(policy.mean(tape, obs), tape.constant_ref(actions));
  return nd::mean(nd::square(diff));
}

envlab::ChunkSampler gaussian_sampler(const GaussianPolicy& policy, bool deterministic) {
  return [&policy, deterministic](const nd::Tensor& obs, std::span<nd::Rng> rngs) {
    envlab::ChunkDecision d;
    d.chunk = deterministic ? policy.mean_eval(obs) : policy.sample(obs, rngs);
    return d;
  };
}

envlab::EvalSummary evaluate_gaussian(const GaussianPolicy& policy, const envlab::Normalizer& norm,
                                      const envlab::RunnerConfig& rc, std::size_t n_episodes, envlab::NoiseBand band) {
  return envlab::run_episodes(rc, norm, gaussian_sampler(policy, true), n_episodes, band);
}

}  // namespace dppo::baselines
