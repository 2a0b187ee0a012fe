#include "dppo/nd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dppo::nd {

namespace {

double eval_loss(const std::function<Var(Tape&)>& loss_fn) {
  Tape tape;
  return loss_fn(tape).item();
}

}  // namespace

GradCheckReport finite_diff_check(std::span<const NamedTensor> params,
                                  const std::function<Var(Tape&)>& loss_fn, const GradCheckOptions& opts) {
  if (!(opts.h > 0)) throw std::invalid_argument("finite_diff_check: h must be positive");
  for (const NamedTensor& p : params) p.tensor->zero_grad();
  double loss_scale = 1.0;
  {
    Tape tape;
    Var loss = loss_fn(tape);
    loss_scale = std::max(1.0, std::abs(loss.item()));
    tape.backward(loss);
  }
  GradCheckReport report;
  for (const NamedTensor& p : params) {
    const std::vector<double> analytic(p.tensor->grad().begin(), p.tensor->grad().end());
    auto data = p.tensor->data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + opts.h;
      const double up = eval_loss(loss_fn);
      data[i] = saved - opts.h;
      const double down = eval_loss(loss_fn);
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.h);
      const double a = analytic[i] * opts.analytic_scale;
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor * loss_scale});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (report.checked == 1 || rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p.name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error <= opts.tol;
  return report;
}

}  // namespace dppo::nd
