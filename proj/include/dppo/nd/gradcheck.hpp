#pragma once

#include <functional>
#include <span>
#include <string>

#include "dppo/nd/mlp.hpp"
#include "dppo/nd/tape.hpp"

namespace dppo::nd {

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-6;
  // Denominator floor of the relative error, scaled by max(1, |loss|).
  // Central differences at h = 1e-5 carry an absolute roundoff error near
  // 1e-11 * |loss|, so gradients below the floor are judged on absolute error.
  double floor = 1e-4;
  // Multiplies the analytic gradient before comparison; 1.01 is the
  // negative control.
  double analytic_scale = 1.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

// `loss_fn` must build the loss on the given tape, binding every tensor in
// `params` with Tape::parameter. It is called once for the analytic gradient
// and twice per parameter element.
GradCheckReport finite_diff_check(std::span<const NamedTensor> params,
                                  const std::function<Var(Tape&)>& loss_fn,
                                  const GradCheckOptions& opts = {});

}  // namespace dppo::nd
