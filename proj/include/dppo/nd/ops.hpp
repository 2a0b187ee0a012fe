#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "dppo/nd/tape.hpp"
#include "dppo/nd/tensor.hpp"

namespace dppo::nd {

enum class Activation { kIdentity, kMish, kTanh, kRelu };

Activation activation_from_string(std::string_view name);
std::string_view to_string(Activation act);

// Untaped forward evaluation. The taped ops below compute their values with
// exactly these routines, so taped and untaped results agree bit-for-bit.
namespace eval {

double activate(double x, Activation act);
double activate_grad(double x, Activation act);
void activate_inplace(Tensor& t, Activation act);

// y[B, out] = x[B, in] * weight[out, in]^T + bias[1, out]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// out[i, :] = cx[i] * x[i, :] + ce[i] * e[i, :]
Tensor affine_mix(const Tensor& x, std::span<const double> cx, const Tensor& e,
                  std::span<const double> ce);

// Diagonal Gaussian log-density summed over a row.
double gaussian_logprob(std::span<const double> x, std::span<const double> mean, double sigma);

}  // namespace eval

Var linear(const Var& x, const Var& weight, const Var& bias);
Var activate(const Var& x, Activation act);

// Elementwise, equal shapes. `add` also accepts b of shape [1, cols] as a row broadcast.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);

Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var square(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var clamp(const Var& a, double lo, double hi);

// Per-row operations; the span length must equal the row count.
Var scale_rows(const Var& a, std::span<const double> s);
Var clamp_rows(const Var& a, std::span<const double> lo, std::span<const double> hi);

Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);

Var sum(const Var& a);
Var mean(const Var& a);
Var row_sum(const Var& a);

// out[i, :] = cx[i] * x[i, :] + ce[i] * e[i, :]  with x constant.
Var affine_mix(const Tensor& x, std::span<const double> cx, const Var& e, std::span<const double> ce);

// Per-row log N(x_i; mean_i, sigma_i^2 I), shape [B, 1].
Var gaussian_logprob_rows(const Var& mean, const Tensor& x, std::span<const double> sigma);
// Per-row log N(x_i; mean_i, diag(exp(log_std))^2), log_std of shape [1, D].
Var gaussian_logprob_rows(const Var& mean, const Tensor& x, const Var& log_std);

}  // namespace dppo::nd
