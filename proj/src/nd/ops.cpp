#include "dppo/nd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dppo/simd/kernels.hpp"

namespace dppo::nd {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_rows(const Tensor& a, std::size_t n, const char* op) {
  if (a.rows() != n) {
    throw ShapeError(std::string(op) + ": expected " + std::to_string(n) + " rows, got " +
                     std::to_string(a.rows()));
  }
}

// Applies `f(i, g)` for every element i of `self`'s gradient, writing into the
// gradient of `parent` when that parent participates in differentiation.
template <typename F>
void accumulate(Tape& tape, int self, const Var& parent, F&& f) {
  if (!tape.requires_grad(parent.id())) return;
  std::span<double> g = tape.grad(self);
  std::span<double> pg = tape.grad(parent.id());
  for (std::size_t i = 0; i < g.size(); ++i) pg[i] += f(i, g[i]);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Activation activation_from_string(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "mish") return Activation::kMish;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kMish:
      return "mish";
    case Activation::kTanh:
      return "tanh";
    case Activation::kRelu:
      return "relu";
  }
  return "identity";
}

namespace eval {

double activate(double x, Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return x;
    case Activation::kMish:
      return x * std::tanh(softplus(x));
    case Activation::kTanh:
      return std::tanh(x);
    case Activation::kRelu:
      return x > 0.0 ? x : 0.0;
  }
  return x;
}

double activate_grad(double x, Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kMish: {
      const double t = std::tanh(softplus(x));
      return t + x * (1.0 - t * t) * sigmoid(x);
    }
    case Activation::kTanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::kRelu:
      return x > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

void activate_inplace(Tensor& t, Activation act) {
  if (act == Activation::kIdentity) return;
  for (double& v : t.data()) v = activate(v, act);
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const std::size_t batch = x.rows();
  const std::size_t in = x.cols();
  const std::size_t out = weight.rows();
  if (weight.cols() != in) {
    throw ShapeError("linear: input width " + std::to_string(in) + " but weight is " +
                     shape_string(weight.shape()));
  }
  if (bias.size() != out) throw ShapeError("linear: bias size mismatch");
  Tensor y = Tensor::matrix(batch, out);
  simd::gemm_nt(batch, out, in, x.data().data(), weight.data().data(), y.data().data());
  for (std::size_t i = 0; i < batch; ++i) {
    double* row = y.data().data() + i * out;
    for (std::size_t j = 0; j < out; ++j) row[j] += bias[j];
  }
  return y;
}

Tensor affine_mix(const Tensor& x, std::span<const double> cx, const Tensor& e,
                  std::span<const double> ce) {
  require_same_shape(x, e, "affine_mix");
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  if (cx.size() != rows || ce.size() != rows) throw ShapeError("affine_mix: coefficient length");
  Tensor out = Tensor::matrix(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = cx[i] * x(i, j) + ce[i] * e(i, j);
  }
  return out;
}

double gaussian_logprob(std::span<const double> x, std::span<const double> mean, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_logprob: sigma must be positive");
  if (x.size() != mean.size()) throw ShapeError("gaussian_logprob: dimension mismatch");
  const double log_sigma = std::log(sigma);
  double lp = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double z = (x[d] - mean[d]) / sigma;
    lp += -kHalfLog2Pi - log_sigma - 0.5 * z * z;
  }
  return lp;
}

}  // namespace eval

Var linear(const Var& x, const Var& weight, const Var& bias) {
  Tape& tape = x.tape();
  Tensor y = eval::linear(x.value(), weight.value(), bias.value());
  return tape.record("linear", std::move(y), {x, weight, bias}, [x, weight, bias](Tape& t, int self) {
    const Tensor& xv = x.value();
    const Tensor& wv = weight.value();
    const std::size_t batch = xv.rows();
    const std::size_t in = xv.cols();
    const std::size_t out = wv.rows();
    std::span<double> g = t.grad(self);
    if (t.requires_grad(x.id())) {
      std::vector<double> dx(batch * in);
      simd::gemm_nn(batch, in, out, g.data(), wv.data().data(), dx.data());
      std::span<double> px = t.grad(x.id());
      for (std::size_t i = 0; i < dx.size(); ++i) px[i] += dx[i];
    }
    if (t.requires_grad(weight.id())) {
      std::vector<double> dw(out * in);
      simd::gemm_tn(out, in, batch, g.data(), xv.data().data(), dw.data());
      std::span<double> pw = t.grad(weight.id());
      for (std::size_t i = 0; i < dw.size(); ++i) pw[i] += dw[i];
    }
    if (t.requires_grad(bias.id())) {
      std::span<double> pb = t.grad(bias.id());
      for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < out; ++j) pb[j] += g[i * out + j];
      }
    }
  });
}

Var activate(const Var& x, Activation act) {
  if (act == Activation::kIdentity) return x;
  Tensor y = x.value();
  eval::activate_inplace(y, act);
  return x.tape().record("activate", std::move(y), {x}, [x, act](Tape& t, int self) {
    const Tensor& xv = x.value();
    accumulate(t, self, x, [&](std::size_t i, double g) { return g * eval::activate_grad(xv[i], act); });
  });
}

Var add(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool broadcast = av.shape() != bv.shape() && bv.rows() == 1 && bv.cols() == av.cols();
  if (!broadcast) require_same_shape(av, bv, "add");
  Tensor y = av;
  const std::size_t cols = av.cols();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += broadcast ? bv[i % cols] : bv[i];
  return a.tape().record("add", std::move(y), {a, b}, [a, b, broadcast, cols](Tape& t, int self) {
    accumulate(t, self, a, [](std::size_t, double g) { return g; });
    if (!t.requires_grad(b.id())) return;
    std::span<double> g = t.grad(self);
    std::span<double> pb = t.grad(b.id());
    for (std::size_t i = 0; i < g.size(); ++i) pb[broadcast ? i % cols : i] += g[i];
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return a.tape().record("sub", std::move(y), {a, b}, [a, b](Tape& t, int self) {
    accumulate(t, self, a, [](std::size_t, double g) { return g; });
    accumulate(t, self, b, [](std::size_t, double g) { return -g; });
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return a.tape().record("mul", std::move(y), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& av = a.value();
    const Tensor& bv2 = b.value();
    accumulate(t, self, a, [&](std::size_t i, double g) { return g * bv2[i]; });
    accumulate(t, self, b, [&](std::size_t i, double g) { return g * av[i]; });
  });
}

Var minimum(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "minimum");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::min(av[i], bv[i]);
  // Ties route the gradient to `a`.
  return a.tape().record("minimum", std::move(y), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& av2 = a.value();
    const Tensor& bv2 = b.value();
    accumulate(t, self, a, [&](std::size_t i, double g) { return av2[i] <= bv2[i] ? g : 0.0; });
    accumulate(t, self, b, [&](std::size_t i, double g) { return av2[i] <= bv2[i] ? 0.0 : g; });
  });
}

Var scale(const Var& a, double s) {
  Tensor y = a.value();
  for (double& v : y.data()) v *= s;
  return a.tape().record("scale", std::move(y), {a}, [a, s](Tape& t, int self) {
    accumulate(t, self, a, [s](std::size_t, double g) { return g * s; });
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor y = a.value();
  for (double& v : y.data()) v += s;
  return a.tape().record("add_scalar", std::move(y), {a}, [a](Tape& t, int self) {
    accumulate(t, self, a, [](std::size_t, double g) { return g; });
  });
}

Var square(const Var& a) {
  Tensor y = a.value();
  for (double& v : y.data()) v *= v;
  return a.tape().record("square", std::move(y), {a}, [a](Tape& t, int self) {
    const Tensor& av = a.value();
    accumulate(t, self, a, [&](std::size_t i, double g) { return 2.0 * av[i] * g; });
  });
}

Var exp(const Var& a) {
  Tensor y = a.value();
  for (double& v : y.data()) v = std::exp(v);
  return a.tape().record("exp", std::move(y), {a}, [a](Tape& t, int self) {
    const Tensor& yv = t.value(self);
    accumulate(t, self, a, [&](std::size_t i, double g) { return g * yv[i]; });
  });
}

Var log(const Var& a) {
  Tensor y = a.value();
  for (double& v : y.data()) {
    if (!(v > 0.0)) throw NonFiniteError("log of non-positive value");
    v = std::log(v);
  }
  return a.tape().record("log", std::move(y), {a}, [a](Tape& t, int self) {
    const Tensor& av = a.value();
    accumulate(t, self, a, [&](std::size_t i, double g) { return g / av[i]; });
  });
}

Var clamp(const Var& a, double lo, double hi) {
  Tensor y = a.value();
  for (double& v : y.data()) v = std::clamp(v, lo, hi);
  return a.tape().record("clamp", std::move(y), {a}, [a, lo, hi](Tape& t, int self) {
    const Tensor& av = a.value();
    accumulate(t, self, a, [&](std::size_t i, double g) {
      return (av[i] >= lo && av[i] <= hi) ? g : 0.0;
    });
  });
}

Var scale_rows(const Var& a, std::span<const double> s) {
  const Tensor& av = a.value();
  require_rows(av, s.size(), "scale_rows");
  const std::size_t cols = av.cols();
  std::vector<double> factors(s.begin(), s.end());
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= factors[i / cols];
  return a.tape().record("scale_rows", std::move(y), {a}, [a, factors = std::move(factors), cols](Tape& t, int self) {
    accumulate(t, self, a, [&](std::size_t i, double g) { return g * factors[i / cols]; });
  });
}

Var clamp_rows(const Var& a, std::span<const double> lo, std::span<const double> hi) {
  const Tensor& av = a.value();
  require_rows(av, lo.size(), "clamp_rows");
  require_rows(av, hi.size(), "clamp_rows");
  const std::size_t cols = av.cols();
  std::vector<double> lov(lo.begin(), lo.end());
  std::vector<double> hiv(hi.begin(), hi.end());
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::clamp(y[i], lov[i / cols], hiv[i / cols]);
  return a.tape().record("clamp_rows", std::move(y), {a},
                         [a, lov = std::move(lov), hiv = std::move(hiv), cols](Tape& t, int self) {
                           const Tensor& x = a.value();
                           accumulate(t, self, a, [&](std::size_t i, double g) {
                             const std::size_t r = i / cols;
                             return (x[i] >= lov[r] && x[i] <= hiv[r]) ? g : 0.0;
                           });
                         });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    require_rows(p.value(), rows, "concat_cols");
    offsets.push_back(total);
    total += p.cols();
  }
  Tensor y = Tensor::matrix(rows, total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy(pv.row(i).begin(), pv.row(i).end(), y.row(i).begin() + static_cast<std::ptrdiff_t>(offsets[k]));
    }
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts[0].tape().record("concat_cols", std::move(y), parts,
                                [ps, offsets, rows, total](Tape& t, int self) {
                                  std::span<double> g = t.grad(self);
                                  for (std::size_t k = 0; k < ps.size(); ++k) {
                                    if (!t.requires_grad(ps[k].id())) continue;
                                    const std::size_t cols = ps[k].cols();
                                    std::span<double> pg = t.grad(ps[k].id());
                                    for (std::size_t i = 0; i < rows; ++i) {
                                      for (std::size_t j = 0; j < cols; ++j) {
                                        pg[i * cols + j] += g[i * total + offsets[k] + j];
                                      }
                                    }
                                  }
                                });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().record("sum", Tensor::scalar(s), {a}, [a](Tape& t, int self) {
    const double g = t.grad(self)[0];
    if (!t.requires_grad(a.id())) return;
    for (double& pg : t.grad(a.id())) pg += g;
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of empty tensor");
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().record("mean", Tensor::scalar(s / n), {a}, [a, n](Tape& t, int self) {
    const double g = t.grad(self)[0] / n;
    if (!t.requires_grad(a.id())) return;
    for (double& pg : t.grad(a.id())) pg += g;
  });
}

Var row_sum(const Var& a) {
  const Tensor& av = a.value();
  const std::size_t rows = av.rows();
  const std::size_t cols = av.cols();
  Tensor y = Tensor::matrix(rows, 1);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += av(i, j);
    y[i] = s;
  }
  return a.tape().record("row_sum", std::move(y), {a}, [a, cols](Tape& t, int self) {
    std::span<double> g = t.grad(self);
    if (!t.requires_grad(a.id())) return;
    std::span<double> pg = t.grad(a.id());
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[i / cols];
  });
}

Var affine_mix(const Tensor& x, std::span<const double> cx, const Var& e, std::span<const double> ce) {
  Tensor y = eval::affine_mix(x, cx, e.value(), ce);
  const std::size_t cols = x.cols();
  std::vector<double> cev(ce.begin(), ce.end());
  return e.tape().record("affine_mix", std::move(y), {e}, [e, cev = std::move(cev), cols](Tape& t, int self) {
    accumulate(t, self, e, [&](std::size_t i, double g) { return g * cev[i / cols]; });
  });
}

Var gaussian_logprob_rows(const Var& mean, const Tensor& x, std::span<const double> sigma) {
  const Tensor& mv = mean.value();
  require_same_shape(mv, x, "gaussian_logprob_rows");
  require_rows(mv, sigma.size(), "gaussian_logprob_rows");
  const std::size_t rows = mv.rows();
  Tensor y = Tensor::matrix(rows, 1);
  for (std::size_t i = 0; i < rows; ++i) y[i] = eval::gaussian_logprob(x.row(i), mv.row(i), sigma[i]);
  std::vector<double> sig(sigma.begin(), sigma.end());
  const std::size_t cols = mv.cols();
  return mean.tape().record("gaussian_logprob", std::move(y), {mean},
                            [mean, x, sig = std::move(sig), cols](Tape& t, int self) {
                              const Tensor& mv2 = mean.value();
                              std::span<double> g = t.grad(self);
                              if (!t.requires_grad(mean.id())) return;
                              std::span<double> pg = t.grad(mean.id());
                              for (std::size_t i = 0; i < pg.size(); ++i) {
                                const std::size_t r = i / cols;
                                pg[i] += g[r] * (x[i] - mv2[i]) / (sig[r] * sig[r]);
                              }
                            });
}

Var gaussian_logprob_rows(const Var& mean, const Tensor& x, const Var& log_std) {
  const Tensor& mv = mean.value();
  const Tensor& ls = log_std.value();
  require_same_shape(mv, x, "gaussian_logprob_rows");
  const std::size_t rows = mv.rows();
  const std::size_t cols = mv.cols();
  if (ls.size() != cols) throw ShapeError("gaussian_logprob_rows: log_std width");
  Tensor y = Tensor::matrix(rows, 1);
  for (std::size_t i = 0; i < rows; ++i) {
    double lp = 0.0;
    for (std::size_t d = 0; d < cols; ++d) {
      const double z = (x(i, d) - mv(i, d)) / std::exp(ls[d]);
      lp += -kHalfLog2Pi - ls[d] - 0.5 * z * z;
    }
    y[i] = lp;
  }
  return mean.tape().record("gaussian_logprob_ls", std::move(y), {mean, log_std},
                            [mean, log_std, x, cols](Tape& t, int self) {
                              const Tensor& mv2 = mean.value();
                              const Tensor& ls2 = log_std.value();
                              std::span<double> g = t.grad(self);
                              const bool dm = t.requires_grad(mean.id());
                              const bool ds = t.requires_grad(log_std.id());
                              for (std::size_t i = 0; i < mv2.size(); ++i) {
                                const std::size_t r = i / cols;
                                const std::size_t d = i % cols;
                                const double inv_var = std::exp(-2.0 * ls2[d]);
                                const double diff = x[i] - mv2[i];
                                if (dm) t.grad(mean.id())[i] += g[r] * diff * inv_var;
                                if (ds) t.grad(log_std.id())[d] += g[r] * (diff * diff * inv_var - 1.0);
                              }
                            });
}

}  // namespace dppo::nd
