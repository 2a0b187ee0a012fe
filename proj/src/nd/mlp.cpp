#include "dppo/nd/mlp.hpp"

#include <cmath>

namespace dppo::nd {

MlpNet::MlpNet(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
  if (spec_.input_dim == 0 || spec_.output_dim == 0) throw std::invalid_argument("MlpNet: zero width");
  for (std::size_t h : spec_.hidden) {
    if (h == 0) throw std::invalid_argument("MlpNet: zero hidden width");
  }
  if (spec_.residual) {
    if (spec_.hidden.empty() || spec_.hidden.size() % 2 == 0) {
      throw std::invalid_argument("MlpNet: residual nets need an odd number of hidden layers");
    }
    for (std::size_t h : spec_.hidden) {
      if (h != spec_.hidden.front()) throw std::invalid_argument("MlpNet: residual widths must match");
    }
  }
  std::vector<std::size_t> widths{spec_.input_dim};
  widths.insert(widths.end(), spec_.hidden.begin(), spec_.hidden.end());
  widths.push_back(spec_.output_dim);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l];
    const std::size_t out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Layer layer{Tensor::matrix(out, in), Tensor::matrix(1, out)};
    for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
    for (double& b : layer.bias.data()) b = rng.uniform(-bound, bound);
    layers_.push_back(std::move(layer));
  }
}

void MlpNet::check_input(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != spec_.input_dim) {
    throw ShapeError("MlpNet: expected input width " + std::to_string(spec_.input_dim) + ", got shape " +
                     shape_string(x.shape()));
  }
  x.require_finite("MlpNet input");
}

template <typename Bind>
Var MlpNet::forward_impl(Tape& tape, const Var& x, Bind&& bind) const {
  check_input(x.value());
  const Activation act = spec_.activation;
  const std::size_t n = layers_.size();
  auto apply = [&](std::size_t l, const Var& in) {
    return linear(in, bind(tape, layers_[l].weight), bind(tape, layers_[l].bias));
  };
  if (!spec_.residual) {
    Var h = x;
    for (std::size_t l = 0; l < n; ++l) {
      h = apply(l, h);
      if (l + 1 < n) h = activate(h, act);
    }
    return h;
  }
  Var h = apply(0, x);
  for (std::size_t l = 1; l + 1 < n; l += 2) {
    Var inner = apply(l, activate(h, act));
    inner = apply(l + 1, activate(inner, act));
    h = add(h, inner);
  }
  return apply(n - 1, activate(h, act));
}

Var MlpNet::forward(Tape& tape, const Var& x) {
  // The layers belong to *this, which is non-const here.
  return forward_impl(tape, x, [](Tape& t, const Tensor& p) { return t.parameter(const_cast<Tensor&>(p)); });
}

Var MlpNet::forward_frozen(Tape& tape, const Var& x) const {
  return forward_impl(tape, x, [](Tape& t, const Tensor& p) { return t.constant_ref(p); });
}

Tensor MlpNet::infer(const Tensor& x) const {
  check_input(x);
  const Activation act = spec_.activation;
  const std::size_t n = layers_.size();
  auto apply = [&](std::size_t l, const Tensor& in) { return eval::linear(in, layers_[l].weight, layers_[l].bias); };
  auto activated = [act](Tensor t) {
    eval::activate_inplace(t, act);
    return t;
  };
  if (!spec_.residual) {
    Tensor h = x;
    for (std::size_t l = 0; l < n; ++l) {
      h = apply(l, h);
      if (l + 1 < n) eval::activate_inplace(h, act);
    }
    return h;
  }
  Tensor h = apply(0, x);
  for (std::size_t l = 1; l + 1 < n; l += 2) {
    Tensor inner = apply(l, activated(h));
    inner = apply(l + 1, activated(std::move(inner)));
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += inner[i];
  }
  return apply(n - 1, activated(h));
}

std::vector<NamedTensor> MlpNet::named_parameters(const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string base = prefix + "layers." + std::to_string(l) + ".";
    out.push_back({base + "weight", &layers_[l].weight});
    out.push_back({base + "bias", &layers_[l].bias});
  }
  return out;
}

std::size_t MlpNet::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

}  // namespace dppo::nd
