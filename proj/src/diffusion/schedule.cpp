#include "dppo/diffusion/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dppo::diffusion {

double NoiseSchedule::explore_sigma(int k) const { return std::max(sigma.at(k), sigma_exp_min); }
double NoiseSchedule::prob_sigma(int k) const { return std::max(sigma.at(k), sigma_prob_min); }

NoiseSchedule cosine_schedule(int K, double s) {
  if (K < 1) throw std::invalid_argument("cosine_schedule: K must be >= 1");
  if (!(s > 0)) throw std::invalid_argument("cosine_schedule: s must be positive");
  auto f = [K, s](int u) {
    const double c = std::cos((static_cast<double>(u) / K + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  NoiseSchedule sch;
  sch.K = K;
  sch.alpha_bar.assign(K + 1, 1.0);
  sch.alpha.assign(K + 1, 1.0);
  sch.beta.assign(K + 1, 0.0);
  sch.sigma.assign(K + 1, 0.0);
  for (int k = 1; k <= K; ++k) {
    sch.beta[k] = std::min(1.0 - f(k) / f(k - 1), 0.999);
    sch.alpha[k] = 1.0 - sch.beta[k];
    sch.alpha_bar[k] = sch.alpha_bar[k - 1] * sch.alpha[k];
  }
  for (int k = 1; k <= K; ++k) {
    const double beta_tilde = (1.0 - sch.alpha_bar[k - 1]) / (1.0 - sch.alpha_bar[k]) * sch.beta[k];
    sch.sigma[k] = std::sqrt(beta_tilde);
  }
  return sch;
}

nd::Tensor ddpm_mean(const nd::Tensor& a_k, const nd::Tensor& eps_hat, int k, const NoiseSchedule& sched) {
  if (k < 1 || k > sched.K) throw std::out_of_range("ddpm_mean: k must lie in [1, K]");
  if (a_k.shape() != eps_hat.shape()) throw nd::ShapeError("ddpm_mean: shape mismatch");
  const auto chain = ddpm_chain(sched);
  const Transition& tr = chain[k - 1];
  nd::Tensor out(a_k.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = tr.c_a * a_k[i] + tr.c_eps * eps_hat[i];
  return out;
}

double ddim_sigma(const NoiseSchedule& sched, int k, int k_prev) {
  const double ab = sched.alpha_bar.at(k);
  const double ab_prev = sched.alpha_bar.at(k_prev);
  return std::sqrt((1.0 - ab_prev) / (1.0 - ab) * (1.0 - ab / ab_prev));
}

namespace {

Transition ddim_transition(const NoiseSchedule& sched, int k, int k_prev, double eta) {
  if (k < 1 || k > sched.K || k_prev < 0 || k_prev >= k) throw std::out_of_range("ddim: bad level pair");
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("ddim: eta must lie in [0, 1]");
  const double ab = sched.alpha_bar[k];
  const double ab_prev = sched.alpha_bar[k_prev];
  const double sig = eta * ddim_sigma(sched, k, k_prev);
  const double rem = 1.0 - ab_prev - sig * sig;
  if (rem < -1e-12) {
    throw std::logic_error("ddim: negative variance remainder " + std::to_string(rem) + " at level " +
                           std::to_string(k));
  }
  Transition tr;
  tr.level = k;
  // mean = sqrt(ab_prev) * (a - sqrt(1 - ab) * eps) / sqrt(ab) + sqrt(rem) * eps
  tr.c_a = std::sqrt(ab_prev) / std::sqrt(ab);
  tr.c_eps = std::sqrt(std::max(0.0, rem)) - std::sqrt(ab_prev) * std::sqrt(1.0 - ab) / std::sqrt(ab);
  tr.sigma = sig;
  return tr;
}

}  // namespace

DdimStep ddim_step(const nd::Tensor& a_k, const nd::Tensor& eps_hat, int k, int k_prev, const NoiseSchedule& sched,
                   double eta) {
  if (a_k.shape() != eps_hat.shape()) throw nd::ShapeError("ddim_step: shape mismatch");
  const Transition tr = ddim_transition(sched, k, k_prev, eta);
  DdimStep out{nd::Tensor(a_k.shape()), tr.sigma};
  for (std::size_t i = 0; i < a_k.size(); ++i) out.mean[i] = tr.c_a * a_k[i] + tr.c_eps * eps_hat[i];
  return out;
}

std::vector<int> ddim_levels(int K, int n) {
  if (n < 1 || n > K) throw std::invalid_argument("ddim_levels: need 1 <= n <= K");
  std::vector<int> tau(n + 1);
  for (int i = 0; i <= n; ++i) {
    tau[i] = static_cast<int>(std::lround(static_cast<double>(i) * K / n));
  }
  return tau;
}

std::vector<Transition> ddpm_chain(const NoiseSchedule& sched) {
  std::vector<Transition> chain(sched.K);
  for (int k = 1; k <= sched.K; ++k) {
    Transition& tr = chain[k - 1];
    tr.level = k;
    tr.c_a = 1.0 / std::sqrt(sched.alpha[k]);
    tr.c_eps = -(sched.beta[k] / std::sqrt(1.0 - sched.alpha_bar[k])) / std::sqrt(sched.alpha[k]);
    tr.sigma = sched.sigma[k];
  }
  return chain;
}

std::vector<Transition> ddim_chain(const NoiseSchedule& sched, int n, double eta) {
  const auto tau = ddim_levels(sched.K, n);
  std::vector<Transition> chain(n);
  for (int i = 0; i < n; ++i) chain[i] = ddim_transition(sched, tau[i + 1], tau[i], eta);
  return chain;
}

}  // namespace dppo::diffusion
