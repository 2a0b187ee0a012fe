#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "dppo/nd/adam.hpp"
#include "dppo/nd/checkpoint.hpp"
#include "dppo/nd/embedding.hpp"
#include "dppo/nd/gradcheck.hpp"
#include "dppo/nd/mlp.hpp"
#include "dppo/nd/ops.hpp"

using namespace dppo::nd;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

// Interpreted re-evaluation of a plain MLP straight from its named parameters.
std::vector<double> oracle_forward(MlpNet& net, const std::vector<double>& x) {
  auto params = net.named_parameters();
  std::vector<double> h = x;
  for (std::size_t l = 0; l < params.size(); l += 2) {
    const Tensor& w = *params[l].tensor;
    const Tensor& b = *params[l + 1].tensor;
    std::vector<double> out(w.rows());
    for (std::size_t o = 0; o < w.rows(); ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < w.cols(); ++i) acc += w(o, i) * h[i];
      out[o] = acc;
    }
    if (l + 2 < params.size()) {
      for (double& v : out) v = v * std::tanh(std::log(1.0 + std::exp(v)));
    }
    h = out;
  }
  return h;
}

}  // namespace

TEST_CASE("identity and zero nets") {
  Rng rng(0);
  MlpNet net({2, {}, 2, Activation::kIdentity, false}, rng);
  auto p = net.named_parameters();
  p[0].tensor->storage() = {1, 0, 0, 1};
  p[1].tensor->storage() = {0, 0};
  Tensor y = net.infer(Tensor({1, 2}, std::vector<double>{1, 2}));
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);

  MlpNet zero({3, {5}, 4, Activation::kMish, false}, rng);
  for (auto& nt : zero.named_parameters()) std::fill(nt.tensor->storage().begin(), nt.tensor->storage().end(), 0.0);
  Tensor z = zero.infer(random_tensor(3, 3, rng));
  for (double v : z.data()) CHECK(v == 0.0);
}

TEST_CASE("seeded mish net matches interpreted oracle") {
  Rng rng(0);
  MlpNet net({4, {8, 6}, 3, Activation::kMish, false}, rng);
  const std::vector<double> x{0.3, -1.2, 0.7, 2.0};
  Tensor y = net.infer(Tensor({1, 4}, x));
  auto want = oracle_forward(net, x);
  REQUIRE(want.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("taped and untaped forward agree bitwise; forward is deterministic") {
  for (bool residual : {false, true}) {
    Rng rng(3);
    MlpNet net({5, {7, 7, 7}, 2, Activation::kMish, residual}, rng);
    Tensor x = random_tensor(9, 5, rng);
    Tape tape;
    Var y = net.forward(tape, tape.constant(x));
    Tensor u = net.infer(x);
    CHECK(y.value().storage() == u.storage());
    CHECK(net.infer(x).storage() == u.storage());
    CHECK(y.value().shape() == Shape{9, 2});
  }
}

TEST_CASE("forward rejects bad inputs") {
  Rng rng(1);
  MlpNet net({3, {4}, 1, Activation::kTanh, false}, rng);
  CHECK_THROWS_AS(net.infer(Tensor::matrix(2, 4)), ShapeError);
  Tensor bad = Tensor::matrix(1, 3);
  bad[1] = std::nan("");
  CHECK_THROWS_AS(net.infer(bad), NonFiniteError);
  CHECK_THROWS_AS(MlpNet({3, {4, 4}, 1, Activation::kTanh, true}, rng), std::invalid_argument);
}

TEST_CASE("parameter count matches architecture") {
  Rng rng(2);
  MlpNet net({4, {16, 16, 16}, 3, Activation::kMish, true}, rng);
  CHECK(net.parameter_count() == (4 * 16 + 16) + 2 * (16 * 16 + 16) + (16 * 3 + 3));
}

TEST_CASE("backward of sum(w * x) gives x") {
  Tensor w({1, 3}, std::vector<double>{0.5, -1.0, 2.0});
  Tensor x({1, 3}, std::vector<double>{3.0, 4.0, -5.0});
  Tape tape;
  Var loss = sum(mul(tape.parameter(w), tape.constant(x)));
  tape.backward(loss);
  for (std::size_t i = 0; i < 3; ++i) CHECK(w.grad()[i] == x[i]);
  CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
}

TEST_CASE("backward preconditions") {
  Tensor w = Tensor::matrix(2, 2, 1.0);
  Tape tape;
  Var v = tape.parameter(w);
  CHECK_THROWS(tape.backward(v));
  CHECK_THROWS(tape.backward(Var{}));
}

TEST_CASE("finite differences: ||Wx||^2 and a two-layer tanh net") {
  Rng rng(11);
  Tensor W = random_tensor(4, 3, rng);
  Tensor x = random_tensor(1, 3, rng);
  Tensor zero_b = Tensor::matrix(1, 4);
  std::vector<NamedTensor> params{{"W", &W}};
  auto rep = finite_diff_check(params, [&](Tape& t) {
    return sum(square(linear(t.constant_ref(x), t.parameter(W), t.constant_ref(zero_b))));
  });
  CHECK(rep.passed);
  CHECK(rep.max_rel_error <= 1e-6);

  MlpNet net({3, {6}, 2, Activation::kTanh, false}, rng);
  Tensor xb = random_tensor(5, 3, rng);
  Tensor target = random_tensor(5, 2, rng);
  auto np = net.named_parameters();
  auto rep2 = finite_diff_check(np, [&](Tape& t) {
    return mean(square(sub(net.forward(t, t.constant_ref(xb)), t.constant_ref(target))));
  });
  CHECK(rep2.max_rel_error <= 1e-6);
}

TEST_CASE("finite differences: linear regression and deep residual net; negative control") {
  Rng rng(12);
  MlpNet lin({4, {}, 1, Activation::kIdentity, false}, rng);
  Tensor xb = random_tensor(16, 4, rng);
  Tensor y = random_tensor(16, 1, rng);
  auto lp = lin.named_parameters();
  auto loss_lin = [&](Tape& t) { return mean(square(sub(lin.forward(t, t.constant_ref(xb)), t.constant_ref(y)))); };
  CHECK(finite_diff_check(lp, loss_lin).max_rel_error <= 1e-7);

  MlpNet deep({4, {8, 8, 8, 8, 8}, 3, Activation::kMish, true}, rng);
  Tensor yd = random_tensor(16, 3, rng);
  auto dp = deep.named_parameters();
  auto loss_deep = [&](Tape& t) {
    return mean(square(sub(deep.forward(t, t.constant_ref(xb)), t.constant_ref(yd))));
  };
  CHECK(finite_diff_check(dp, loss_deep).max_rel_error <= 1e-6);

  GradCheckOptions corrupt;
  corrupt.analytic_scale = 1.01;
  auto bad = finite_diff_check(dp, loss_deep, corrupt);
  CHECK_FALSE(bad.passed);
  CHECK(bad.max_rel_error > 1e-3);
}

TEST_CASE("finite differences for every differentiable op over five seeds") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    Tensor a = random_tensor(3, 4, rng);
    Tensor b = random_tensor(3, 4, rng);
    Tensor row = random_tensor(1, 4, rng);
    Tensor pos = Tensor::matrix(3, 4);
    for (double& v : pos.data()) v = 0.5 + rng.uniform();
    std::vector<double> s{0.3, -1.5, 2.0};
    std::vector<double> lo{-0.4, -0.2, -0.3};
    std::vector<double> hi{0.4, 0.5, 0.3};
    Tensor x = random_tensor(3, 4, rng);
    std::vector<double> sig{0.3, 0.7, 1.1};
    Tensor ls = random_tensor(1, 4, rng, 0.3);
    Tensor w = random_tensor(5, 4, rng);
    Tensor bias = random_tensor(1, 5, rng);

    auto check = [&](const char* what, std::vector<NamedTensor> params, std::function<Var(Tape&)> f) {
      auto rep = finite_diff_check(params, f);
      INFO(std::string(what) << " seed " << seed << " worst " << rep.worst_param << " a=" << rep.worst_analytic
                << " n=" << rep.worst_numeric);
      CHECK(rep.max_rel_error <= 1e-6);
    };
    check("linear", {{"a", &a}, {"w", &w}, {"bias", &bias}},
          [&](Tape& t) { return sum(square(linear(t.parameter(a), t.parameter(w), t.parameter(bias)))); });
    for (Activation act : {Activation::kMish, Activation::kTanh, Activation::kIdentity}) {
      check("activate", {{"a", &a}}, [&](Tape& t) { return sum(mul(activate(t.parameter(a), act), t.constant_ref(b))); });
    }
    check("add/sub/mul", {{"a", &a}, {"b", &b}}, [&](Tape& t) {
      Var va = t.parameter(a), vb = t.parameter(b);
      return sum(mul(add(va, vb), sub(va, scale(vb, 0.5))));
    });
    check("add broadcast", {{"a", &a}, {"row", &row}},
          [&](Tape& t) { return sum(square(add(t.parameter(a), t.parameter(row)))); });
    check("minimum", {{"a", &a}, {"b", &b}},
          [&](Tape& t) { return sum(mul(minimum(t.parameter(a), t.parameter(b)), t.constant_ref(x))); });
    check("exp/log", {{"pos", &pos}},
          [&](Tape& t) { return sum(add(exp(scale(t.parameter(pos), 0.3)), log(t.parameter(pos)))); });
    check("add_scalar/square/mean", {{"a", &a}}, [&](Tape& t) { return mean(square(add_scalar(t.parameter(a), 0.7))); });
    check("clamp", {{"a", &a}},
          [&](Tape& t) { return sum(mul(clamp(t.parameter(a), -0.5, 0.6), t.constant_ref(b))); });
    check("scale_rows/clamp_rows/row_sum", {{"a", &a}}, [&](Tape& t) {
      Var r = row_sum(clamp_rows(scale_rows(t.parameter(a), s), lo, hi));
      return sum(square(r));
    });
    check("concat_cols", {{"a", &a}, {"b", &b}}, [&](Tape& t) {
      Var c = concat_cols({t.parameter(a), t.constant_ref(x), t.parameter(b)});
      return sum(mul(c, c));
    });
    check("affine_mix", {{"b", &b}}, [&](Tape& t) { return sum(square(affine_mix(x, s, t.parameter(b), sig))); });
    check("gaussian_logprob sigma", {{"a", &a}},
          [&](Tape& t) { return sum(square(gaussian_logprob_rows(t.parameter(a), x, sig))); });
    check("gaussian_logprob log_std", {{"a", &a}, {"ls", &ls}},
          [&](Tape& t) { return sum(gaussian_logprob_rows(t.parameter(a), x, t.parameter(ls))); });
  }
}

TEST_CASE("gaussian_logprob closed forms") {
  std::vector<double> mu{0.0}, mu2{0.0, 0.0};
  CHECK(eval::gaussian_logprob(mu, mu, 1.0) == doctest::Approx(-0.9189385).epsilon(1e-7));
  CHECK(eval::gaussian_logprob(mu2, mu2, 1.0) == doctest::Approx(-1.8378771).epsilon(1e-7));
  std::vector<double> one{0.3};
  CHECK(eval::gaussian_logprob(one, std::vector<double>{0.0}, 0.3) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi) - std::log(0.3) - 0.5).epsilon(1e-12));
  CHECK_THROWS(eval::gaussian_logprob(mu, mu, 0.0));
}

TEST_CASE("non-finite op results raise") {
  Tensor a({1, 1}, std::vector<double>{800.0});
  Tape tape;
  CHECK_THROWS_AS(exp(tape.constant_ref(a)), NonFiniteError);
  Tensor z({1, 1}, std::vector<double>{0.0});
  CHECK_THROWS_AS(log(tape.constant_ref(z)), NonFiniteError);
}

TEST_CASE("adam closed-form first step") {
  Tensor theta({1, 1}, std::vector<double>{0.0});
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.lr_end = 0.1;
  cfg.eps = 1e-8;
  Adam opt({&theta}, cfg);
  theta.grad()[0] = 1.0;
  opt.step();
  CHECK(theta[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(theta[0] == doctest::Approx(-0.0999999999).epsilon(1e-9));
}

TEST_CASE("adam with zero gradient and no decay is the identity") {
  Rng rng(4);
  Tensor p = random_tensor(3, 3, rng);
  const auto before = p.storage();
  AdamConfig cfg;
  cfg.ema_decay = 0.995;
  Adam opt({&p}, cfg);
  for (int i = 0; i < 10; ++i) {
    opt.zero_grad();
    opt.step();
  }
  CHECK(p.storage() == before);
}

TEST_CASE("cosine decay endpoints and monotonicity") {
  CHECK(cosine_lr(1e-3, 1e-4, 0, 100) == 1e-3);
  CHECK(cosine_lr(1e-3, 1e-4, 100, 100) == doctest::Approx(1e-4).epsilon(1e-15));
  CHECK(cosine_lr(1e-3, 1e-4, 500, 100) == doctest::Approx(1e-4).epsilon(1e-15));
  double prev = 1.0;
  for (int t = 0; t <= 100; ++t) {
    const double lr = cosine_lr(1e-3, 1e-4, t, 100);
    CHECK(lr <= prev);
    prev = lr;
  }
  Tensor p = Tensor::matrix(1, 1);
  AdamConfig cfg;
  cfg.lr = 1e-3;
  cfg.lr_end = 1e-4;
  cfg.total_steps = 5;
  Adam opt({&p}, cfg);
  for (int i = 0; i < 5; ++i) {
    p.grad()[0] = 1.0;
    opt.step();
  }
  CHECK(opt.lr() == doctest::Approx(1e-4).epsilon(1e-15));
}

TEST_CASE("EMA edge decays") {
  Rng rng(5);
  for (double decay : {0.0, 1.0}) {
    Tensor p = random_tensor(2, 2, rng);
    const auto init = p.storage();
    AdamConfig cfg;
    cfg.ema_decay = decay;
    Adam opt({&p}, cfg);
    for (int i = 0; i < 3; ++i) {
      for (double& g : p.grad()) g = rng.normal();
      opt.step();
      if (decay == 0.0) CHECK(opt.ema()[0].storage() == p.storage());
      if (decay == 1.0) CHECK(opt.ema()[0].storage() == init);
    }
  }
}

TEST_CASE("adam aborts on non-finite gradient without touching state") {
  Tensor p({1, 2}, std::vector<double>{1.0, 2.0});
  Adam opt({&p}, AdamConfig{});
  p.grad()[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(opt.step(), NonFiniteError);
  CHECK(opt.step_count() == 0);
  CHECK(p[0] == 1.0);
}

TEST_CASE("time embedding is deterministic and distinct") {
  TimeEmbedding emb(16);
  std::vector<int> ks(20);
  for (int k = 0; k < 20; ++k) ks[k] = k;
  Tensor e = emb.embed(ks);
  CHECK(emb.embed(ks).storage() == e.storage());
  for (int i = 0; i < 20; ++i)
    for (int j = i + 1; j < 20; ++j) {
      double d = 0;
      for (std::size_t c = 0; c < 16; ++c) d += std::abs(e(i, c) - e(j, c));
      CHECK(d > 1e-3);
    }
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(6);
  MlpNet net({3, {5}, 2, Activation::kMish, false}, rng);
  net.named_parameters()[0].tensor->storage()[0] = 1.0 / 3.0;
  net.named_parameters()[1].tensor->storage()[0] = -0.0;
  const auto dir = std::filesystem::temp_directory_path() / "dppo_test_ckpt";
  std::filesystem::remove_all(dir);
  auto params = net.named_parameters();
  save_checkpoint(dir / "net", params, {{"hidden", 5}}, 42);

  Rng other(99);
  MlpNet copy({3, {5}, 2, Activation::kMish, false}, other);
  Checkpoint ck = load_checkpoint(dir / "net");
  CHECK(ck.seed == 42);
  CHECK(ck.config["hidden"] == 5);
  auto cp = copy.named_parameters();
  restore_tensors(ck, cp, true);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& x = params[i].tensor->storage();
    const auto& y = cp[i].tensor->storage();
    REQUIRE(x.size() == y.size());
    CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0);
  }
  CHECK(std::signbit(cp[1].tensor->storage()[0]));

  // Saving twice yields identical bytes.
  save_checkpoint(dir / "again", params, {{"hidden", 5}}, 42);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  CHECK(slurp(dir / "net.bin") == slurp(dir / "again.bin"));

  MlpNet wrong({3, {6}, 2, Activation::kMish, false}, other);
  auto wp = wrong.named_parameters();
  CHECK_THROWS_AS(restore_tensors(ck, wp), ShapeError);
  std::filesystem::remove_all(dir);
}
