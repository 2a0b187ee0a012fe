#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "dppo/diffusion/bc.hpp"
#include "dppo/diffusion/policy.hpp"
#include "dppo/diffusion/sampler.hpp"
#include "dppo/nd/gradcheck.hpp"
#include "dppo/nd/ops.hpp"

using namespace dppo;
using namespace dppo::diffusion;
using nd::Tensor;

namespace {

PolicyConfig tiny_config(int K = 6, int K_prime = 3) {
  PolicyConfig c;
  c.net.obs_dim = 4;
  c.net.chunk_dim = 8;
  c.net.time_dim = 8;
  c.net.state_hidden = {8};
  c.net.state_features = 6;
  c.net.head_hidden = {16, 16, 16};
  c.K = K;
  c.K_prime = K_prime;
  return c;
}

Tensor random_tensor(std::size_t r, std::size_t c, nd::Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

std::vector<nd::Rng> make_rngs(std::size_t n, std::uint64_t seed) {
  std::vector<nd::Rng> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(nd::derive_seed(seed, i));
  return out;
}

void perturb(NoisePredictor& net, double amount) {
  for (auto& p : net.named_parameters()) {
    for (double& v : p.tensor->data()) v += amount;
  }
}

}  // namespace

TEST_CASE("cosine schedule matches an independent evaluation of the formula") {
  const int K = 20;
  const long double s = 0.008L;
  auto f = [&](int u) {
    const long double c = std::cos(((static_cast<long double>(u) / K) + s) / (1 + s) * std::numbers::pi_v<long double> / 2);
    return c * c;
  };
  const NoiseSchedule sch = cosine_schedule(K, 0.008);
  CHECK(sch.alpha_bar[0] > 0.99);
  CHECK(sch.alpha_bar[0] <= 1.0);
  CHECK(sch.alpha_bar[1] > 0.99);
  long double ab_prev = 1;
  for (int k = 1; k <= K; ++k) {
    const long double beta = std::min(1 - f(k) / f(k - 1), 0.999L);
    const long double ab = ab_prev * (1 - beta);
    const long double sigma = std::sqrt((1 - ab_prev) / (1 - ab) * beta);
    CHECK(std::abs(sch.alpha_bar[k] - static_cast<double>(ab)) <= 1e-12);
    CHECK(std::abs(sch.sigma[k] - static_cast<double>(sigma)) <= 1e-12);
    CHECK(std::abs(sch.beta[k] - static_cast<double>(beta)) <= 1e-12);
    ab_prev = ab;
  }
  CHECK(sch.sigma[1] == 0.0);
  CHECK_THROWS(cosine_schedule(0));
}

TEST_CASE("schedule monotonicity and floors") {
  for (int K : {1, 5, 20, 100}) {
    NoiseSchedule sch = cosine_schedule(K);
    for (int k = 1; k <= K; ++k) {
      CHECK(sch.alpha_bar[k] < sch.alpha_bar[k - 1]);
      CHECK(std::isfinite(sch.sigma[k]));
      CHECK(sch.sigma[k] >= 0.0);
    }
    sch.sigma_exp_min = 0.1;
    sch.sigma_prob_min = 0.05;
    for (int k = 1; k <= K; ++k) {
      CHECK(sch.explore_sigma(k) >= 0.1);
      CHECK(sch.prob_sigma(k) >= 0.05);
    }
  }
}

TEST_CASE("ddpm_mean closed forms") {
  NoiseSchedule sch;
  sch.K = 1;
  sch.alpha = {1.0, 1.0};
  sch.beta = {0.0, 0.0};
  sch.alpha_bar = {1.0, 0.5};
  sch.sigma = {0.0, 0.0};
  Tensor a({1, 2}, std::vector<double>{0.3, -0.7});
  Tensor zero = Tensor::matrix(1, 2);
  Tensor mu = ddpm_mean(a, zero, 1, sch);
  CHECK(mu[0] == 0.3);
  CHECK(mu[1] == -0.7);

  sch.alpha = {1.0, 0.9};
  sch.beta = {0.0, 0.1};
  Tensor one({1, 1}, std::vector<double>{1.0});
  Tensor eps({1, 1}, std::vector<double>{0.2});
  const double want = (1.0 / std::sqrt(0.9)) * (1.0 - (0.1 / std::sqrt(0.5)) * 0.2);
  CHECK(ddpm_mean(one, eps, 1, sch)[0] == doctest::Approx(want).epsilon(1e-14));
  CHECK_THROWS(ddpm_mean(one, eps, 0, sch));

  const NoiseSchedule cs = cosine_schedule(10);
  nd::Rng rng(1);
  Tensor batch = random_tensor(5, 8, rng);
  CHECK(ddpm_mean(batch, batch, 4, cs).shape() == batch.shape());
}

TEST_CASE("ddim_step closed forms") {
  const NoiseSchedule sch = cosine_schedule(20);
  nd::Rng rng(2);
  Tensor a = random_tensor(3, 8, rng);
  Tensor eps = random_tensor(3, 8, rng);
  CHECK(ddim_step(a, eps, 8, 4, sch, 0.0).sigma_eff == 0.0);
  Tensor zero = Tensor::matrix(3, 8);
  DdimStep st = ddim_step(a, zero, 8, 4, sch, 0.7);
  const double f = std::sqrt(sch.alpha_bar[4] / sch.alpha_bar[8]);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(st.mean[i] == doctest::Approx(f * a[i]).epsilon(1e-14));
  CHECK(ddim_levels(20, 5) == std::vector<int>{0, 4, 8, 12, 16, 20});
}

TEST_CASE("ddim eta=1 step statistics match the matched ddpm step") {
  const NoiseSchedule sch = cosine_schedule(20);
  const int k = 12, kp = 8;
  nd::Rng rng(3);
  Tensor a = random_tensor(1, 8, rng);
  Tensor eps = random_tensor(1, 8, rng);
  const DdimStep st = ddim_step(a, eps, k, kp, sch, 1.0);
  // DDPM on the two-level sub-schedule.
  const double alpha = sch.alpha_bar[k] / sch.alpha_bar[kp];
  const double beta = 1.0 - alpha;
  const double var = (1.0 - sch.alpha_bar[kp]) / (1.0 - sch.alpha_bar[k]) * beta;
  const double sd = std::sqrt(var);
  std::vector<double> ddpm_mu(8);
  for (int d = 0; d < 8; ++d) ddpm_mu[d] = (a[d] - beta / std::sqrt(1.0 - sch.alpha_bar[k]) * eps[d]) / std::sqrt(alpha);

  const int n = 100000;
  std::vector<double> sum(8, 0.0);
  double sq = 0.0;
  nd::Rng draw(4);
  std::vector<double> samples(static_cast<std::size_t>(n) * 8);
  for (int s = 0; s < n; ++s) {
    for (int d = 0; d < 8; ++d) {
      const double x = st.mean[d] + st.sigma_eff * draw.normal();
      samples[s * 8 + d] = x;
      sum[d] += x;
    }
  }
  for (int d = 0; d < 8; ++d) {
    const double m = sum[d] / n;
    CHECK(std::abs(m - ddpm_mu[d]) <= 0.01 * (std::abs(ddpm_mu[d]) + sd));
  }
  for (int s = 0; s < n; ++s)
    for (int d = 0; d < 8; ++d) {
      const double c = samples[s * 8 + d] - sum[d] / n;
      sq += c * c;
    }
  const double emp_var = sq / (8.0 * (n - 1));
  CHECK(std::abs(emp_var / var - 1.0) <= 0.01);
}

TEST_CASE("K=1 chain matches its closed-form Gaussian") {
  PolicyConfig cfg = tiny_config(1, 1);
  DiffusionPolicy pol(cfg, 5);
  nd::Rng rng(6);
  Tensor obs = random_tensor(1, 4, rng);
  Tensor a1 = random_tensor(1, 8, rng, 0.5);
  const std::vector<int> lv{1};
  const Tensor eps_hat = pol.base().infer(a1, obs, lv);
  const Tensor mu = ddpm_mean(a1, eps_hat, 1, pol.schedule());
  const double sigma = pol.sample_sigma(0, SampleMode::kExplore);
  CHECK(sigma == 0.1);

  const int n = 100000;
  std::vector<double> sum(8, 0.0), sq(8, 0.0);
  auto rngs = make_rngs(1, 7);
  double max_lp_err = 0.0;
  for (int s = 0; s < n; ++s) {
    DenoiseTrace tr = sample_chunk(pol, obs, rngs, SampleMode::kExplore, &a1);
    for (int d = 0; d < 8; ++d) {
      sum[d] += tr.x[0][d];
      sq[d] += tr.x[0][d] * tr.x[0][d];
    }
    if (s < 100) {
      const double closed = nd::eval::gaussian_logprob(tr.x[0].row(0), mu.row(0), 0.1);
      max_lp_err = std::max(max_lp_err, std::abs(closed - tr.logprob(0, 0)));
    }
  }
  double pooled_var = 0.0;
  for (int d = 0; d < 8; ++d) {
    const double m = sum[d] / n;
    CHECK(std::abs(m - mu[d]) <= 0.01 * (std::abs(mu[d]) + sigma));
    pooled_var += (sq[d] / n - m * m) / 8.0;
  }
  CHECK(std::abs(std::sqrt(pooled_var) / sigma - 1.0) <= 0.01);
  CHECK(max_lp_err <= 1e-12);
}

TEST_CASE("ddim eta=0 evaluation is bit-deterministic") {
  PolicyConfig cfg = tiny_config(20, 5);
  cfg.sampler = SamplerKind::kDdim;
  cfg.ddim_steps = 5;
  DiffusionPolicy pol(cfg, 8);
  nd::Rng rng(9);
  Tensor obs = random_tensor(4, 4, rng);
  Tensor init = random_tensor(4, 8, rng);
  auto r1 = make_rngs(4, 1);
  auto r2 = make_rngs(4, 2);
  DenoiseTrace a = sample_chunk(pol, obs, r1, SampleMode::kEval, &init);
  DenoiseTrace b = sample_chunk(pol, obs, r2, SampleMode::kEval, &init);
  CHECK(a.x[0].storage() == b.x[0].storage());
  for (int j = 0; j < 5; ++j) CHECK(a.sigma[j] == 0.0);
  CHECK(pol.sample_sigma(0, SampleMode::kExplore) >= 0.1);
}

TEST_CASE("stored log-likelihoods recompute exactly") {
  DiffusionPolicy pol(tiny_config(6, 3), 10);
  pol.split_finetune_weights();
  nd::Rng rng(11);
  Tensor obs = random_tensor(5, 4, rng);
  auto rngs = make_rngs(5, 3);
  DenoiseTrace tr = sample_chunk(pol, obs, rngs, SampleMode::kExplore);
  CHECK(tr.steps() == 6);
  for (int j = 0; j < 6; ++j) {
    std::vector<int> steps(5, j);
    auto lp = step_logprob_eval(pol, obs, tr.x[j + 1], tr.x[j], steps);
    nd::Tape tape;
    nd::Var taped = step_logprob(tape, pol, obs, tr.x[j + 1], tr.x[j], steps);
    for (int i = 0; i < 5; ++i) {
      CHECK(lp[i] == tr.logprob(i, j));
      CHECK(taped.value()[i] == tr.logprob(i, j));
    }
    CHECK(tr.sigma[j] >= 0.1);
    CHECK(tr.prob_sigma[j] >= 0.1);
  }
  for (double v : tr.action.data()) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("rows sample independently of batch composition") {
  DiffusionPolicy pol(tiny_config(), 12);
  nd::Rng rng(13);
  Tensor obs = random_tensor(3, 4, rng);
  auto rngs = make_rngs(3, 4);
  DenoiseTrace all = sample_chunk(pol, obs, rngs, SampleMode::kExplore);
  Tensor last({1, 4}, std::vector<double>(obs.row(2).begin(), obs.row(2).end()));
  std::vector<nd::Rng> one{nd::Rng(nd::derive_seed(4, 2))};
  DenoiseTrace single = sample_chunk(pol, last, one, SampleMode::kExplore);
  for (int d = 0; d < 8; ++d) CHECK(single.x[0][d] == all.x[0](2, d));
}

TEST_CASE("split_finetune_weights dispatch") {
  DiffusionPolicy pol(tiny_config(6, 3), 14);
  nd::Rng rng(15);
  Tensor obs = random_tensor(2, 4, rng);
  auto r0 = make_rngs(2, 5);
  DenoiseTrace before = sample_chunk(pol, obs, r0, SampleMode::kExplore);
  pol.split_finetune_weights();
  CHECK_THROWS_AS(pol.split_finetune_weights(), std::logic_error);
  auto r1 = make_rngs(2, 5);
  DenoiseTrace after = sample_chunk(pol, obs, r1, SampleMode::kExplore);
  CHECK(before.x[0].storage() == after.x[0].storage());

  // Perturbing the fine-tuned copy leaves the frozen steps j >= K' untouched.
  DiffusionPolicy p2 = pol;
  perturb(p2.finetuned(), 0.01);
  auto r2 = make_rngs(2, 5);
  DenoiseTrace ft_changed = sample_chunk(p2, obs, r2, SampleMode::kExplore);
  for (int j = 3; j <= 6; ++j) CHECK(ft_changed.x[j].storage() == after.x[j].storage());
  CHECK(ft_changed.x[2].storage() != after.x[2].storage());

  // Perturbing the frozen net changes the early steps; given the same inputs
  // the tail steps are unaffected.
  DiffusionPolicy p3 = pol;
  perturb(p3.base(), 0.01);
  auto r3 = make_rngs(2, 5);
  DenoiseTrace base_changed = sample_chunk(p3, obs, r3, SampleMode::kExplore);
  CHECK(base_changed.x[5].storage() != after.x[5].storage());
  for (int j = 0; j < 3; ++j) {
    std::vector<int> steps(2, j);
    CHECK(step_logprob_eval(p3, obs, after.x[j + 1], after.x[j], steps) ==
          step_logprob_eval(pol, obs, after.x[j + 1], after.x[j], steps));
  }

  // Gradients of a tail likelihood never reach the frozen parameters.
  for (auto& p : pol.named_parameters()) p.tensor->zero_grad();
  nd::Tape tape;
  std::vector<int> steps{0, 2};
  tape.backward(nd::sum(step_logprob(tape, pol, obs, after.x[1], after.x[0], steps)));
  double base_norm = 0.0, ft_norm = 0.0;
  for (auto& p : pol.base().named_parameters())
    for (double g : p.tensor->grad()) base_norm += std::abs(g);
  for (auto& p : pol.finetuned().named_parameters())
    for (double g : p.tensor->grad()) ft_norm += std::abs(g);
  CHECK(base_norm == 0.0);
  CHECK(ft_norm > 0.0);
}

TEST_CASE("bc loss: oracle and zero predictors") {
  DiffusionPolicy pol(tiny_config(), 16);
  NoisePredictor net = pol.base();
  for (auto& p : net.named_parameters()) std::fill(p.tensor->data().begin(), p.tensor->data().end(), 0.0);
  nd::Rng rng(17);
  Tensor obs = random_tensor(4, 4, rng);
  Tensor actions = random_tensor(4, 8, rng, 0.5);
  BcSample sample = make_bc_sample(actions, pol.schedule(), rng);
  std::fill(sample.eps.data().begin(), sample.eps.data().end(), 0.0);
  nd::Tape t0;
  CHECK(noise_regression_loss(t0, net, obs, sample).item() == 0.0);

  const std::size_t n = 100000;
  Tensor big_obs = Tensor::matrix(n, 4);
  Tensor big_act = Tensor::matrix(n, 8, 0.3);
  nd::Tape t1;
  const double loss = bc_loss(t1, net, big_obs, big_act, pol.schedule(), rng).item();
  CHECK(std::abs(loss / 8.0 - 1.0) <= 0.02);
  nd::Tape t2;
  CHECK_THROWS(bc_loss(t2, net, Tensor::matrix(0, 4), Tensor::matrix(0, 8), pol.schedule(), rng));
}

TEST_CASE("bc loss gradient, order invariance and duplication") {
  DiffusionPolicy pol(tiny_config(), 18);
  NoisePredictor& net = pol.base();
  nd::Rng rng(19);
  Tensor obs = random_tensor(6, 4, rng);
  Tensor actions = random_tensor(6, 8, rng, 0.5);
  const BcSample sample = make_bc_sample(actions, pol.schedule(), rng);
  auto params = net.named_parameters();
  auto rep = nd::finite_diff_check(params, [&](nd::Tape& t) { return noise_regression_loss(t, net, obs, sample); });
  INFO(rep.worst_param << " a=" << rep.worst_analytic << " n=" << rep.worst_numeric);
  CHECK(rep.max_rel_error <= 1e-6);

  // Reverse the batch; duplicate it.
  BcSample rev = sample, dup;
  Tensor obs_rev = obs;
  const std::size_t B = 6;
  for (std::size_t i = 0; i < B; ++i) {
    std::copy(sample.noisy.row(B - 1 - i).begin(), sample.noisy.row(B - 1 - i).end(), rev.noisy.row(i).begin());
    std::copy(sample.eps.row(B - 1 - i).begin(), sample.eps.row(B - 1 - i).end(), rev.eps.row(i).begin());
    std::copy(obs.row(B - 1 - i).begin(), obs.row(B - 1 - i).end(), obs_rev.row(i).begin());
    rev.levels[i] = sample.levels[B - 1 - i];
  }
  dup.noisy = Tensor::matrix(2 * B, 8);
  dup.eps = Tensor::matrix(2 * B, 8);
  Tensor obs_dup = Tensor::matrix(2 * B, 4);
  for (std::size_t i = 0; i < 2 * B; ++i) {
    std::copy(sample.noisy.row(i % B).begin(), sample.noisy.row(i % B).end(), dup.noisy.row(i).begin());
    std::copy(sample.eps.row(i % B).begin(), sample.eps.row(i % B).end(), dup.eps.row(i).begin());
    std::copy(obs.row(i % B).begin(), obs.row(i % B).end(), obs_dup.row(i).begin());
    dup.levels.push_back(sample.levels[i % B]);
  }
  nd::Tape a, b, c;
  const double l0 = noise_regression_loss(a, net, obs, sample).item();
  CHECK(noise_regression_loss(b, net, obs_rev, rev).item() == doctest::Approx(l0).epsilon(1e-13));
  CHECK(noise_regression_loss(c, net, obs_dup, dup).item() == doctest::Approx(l0).epsilon(1e-13));
}

TEST_CASE("chunk flattening round-trips") {
  nd::Rng rng(20);
  Tensor chunk = random_tensor(4, 2, rng);
  Tensor flat = chunk.reshaped({1, 8});
  CHECK(flat.reshaped({4, 2}).storage() == chunk.storage());
}
