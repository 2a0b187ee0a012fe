#include "dppo/rl/ppo.hpp"

#include <cmath>
#include <stdexcept>

#include "dppo/nd/ops.hpp"

namespace dppo::rl {

std::size_t DiffusionMdpIndex::flat(std::size_t t, int k) const {
  if (k < 0 || k >= k_prime) throw std::out_of_range("DiffusionMdpIndex: k outside [0, K')");
  return t * static_cast<std::size_t>(k_prime) + static_cast<std::size_t>(k_prime - k - 1);
}

int DiffusionMdpIndex::level_of(std::size_t flat) const {
  return k_prime - 1 - static_cast<int>(flat % static_cast<std::size_t>(k_prime));
}

std::vector<double> clip_schedule(double eps0, int k_prime) {
  if (!(eps0 > 0.0)) throw std::invalid_argument("clip_schedule: eps0 must be positive");
  if (k_prime < 1) throw std::invalid_argument("clip_schedule: K' must be at least 1");
  std::vector<double> out(static_cast<std::size_t>(k_prime), eps0);
  if (k_prime == 1) return out;
  for (int k = 0; k < k_prime; ++k) {
    out[static_cast<std::size_t>(k)] = eps0 * std::pow(0.1, static_cast<double>(k) / (k_prime - 1));
  }
  return out;
}

void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) return;
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= static_cast<double>(adv.size());
  const double sd = std::sqrt(var);
  for (double& a : adv) a = sd > 1e-12 ? (a - mean) / sd : a - mean;
}

PpoLoss ppo_loss(const nd::Var& new_logprob, std::span<const double> old_logprob, std::span<const double> adv,
                 std::span<const double> eps) {
  const std::size_t n = new_logprob.rows();
  if (new_logprob.cols() != 1 || old_logprob.size() != n || adv.size() != n || eps.size() != n) {
    throw nd::ShapeError("ppo_loss: expected [B, 1] logprobs with matching old/adv/eps lengths");
  }
  nd::Tape& tape = new_logprob.tape();
  const nd::Tensor old(nd::Shape{n, 1}, std::vector<double>(old_logprob.begin(), old_logprob.end()));
  nd::Var log_ratio = nd::sub(new_logprob, tape.constant(old));
  log_ratio.value().require_finite("ppo_loss log ratio");
  nd::Var ratio = nd::exp(log_ratio);
  ratio.value().require_finite("ppo_loss ratio");
  std::vector<double> lo(n), hi(n);
  PpoDiagnostics diag;
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = 1.0 - eps[i];
    hi[i] = 1.0 + eps[i];
    const double r = ratio.value()[i];
    if (std::abs(r - 1.0) > eps[i]) diag.clip_fraction += 1.0;
    diag.approx_kl += (r - 1.0) - log_ratio.value()[i];
  }
  if (n > 0) {
    diag.clip_fraction /= static_cast<double>(n);
    diag.approx_kl /= static_cast<double>(n);
  }
  nd::Var surr = nd::scale_rows(ratio, adv);
  nd::Var clipped = nd::scale_rows(nd::clamp_rows(ratio, lo, hi), adv);
  return {nd::scale(nd::mean(nd::minimum(surr, clipped)), -1.0), diag};
}

nd::Var value_loss(const nd::Var& pred, std::span<const double> target) {
  const std::size_t n = pred.rows();
  if (pred.cols() != 1 || target.size() != n) throw nd::ShapeError("value_loss: expected [B, 1] and B targets");
  const nd::Tensor t(nd::Shape{n, 1}, std::vector<double>(target.begin(), target.end()));
  return nd::mean(nd::square(nd::sub(pred, pred.tape().constant(t))));
}

}  // namespace dppo::rl
