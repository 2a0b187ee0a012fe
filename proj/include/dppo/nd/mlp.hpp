#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dppo/nd/ops.hpp"
#include "dppo/nd/rng.hpp"
#include "dppo/nd/tape.hpp"

namespace dppo::nd {

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct MlpSpec {
  std::size_t input_dim = 0;
  // Plain nets: one dense layer per entry. Residual nets: all widths equal and
  // an odd count; the first entry is an input projection, each following pair
  // forms one two-layer pre-activation residual block.
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 0;
  Activation activation = Activation::kMish;
  bool residual = false;
};

// Dense multilayer perceptron. Weights are [out, in], biases [1, out].
class MlpNet {
 public:
  MlpNet() = default;
  // Uniform fan-in initialization U(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
  MlpNet(MlpSpec spec, Rng& rng);

  const MlpSpec& spec() const { return spec_; }
  std::size_t input_dim() const { return spec_.input_dim; }
  std::size_t output_dim() const { return spec_.output_dim; }

  // Taped forward with trainable parameters.
  Var forward(Tape& tape, const Var& x);
  // Taped forward treating the weights as constants.
  Var forward_frozen(Tape& tape, const Var& x) const;
  // Untaped forward; bit-identical to forward().
  Tensor infer(const Tensor& x) const;

  std::vector<NamedTensor> named_parameters(const std::string& prefix = "");
  std::size_t parameter_count() const;

 private:
  struct Layer {
    Tensor weight;
    Tensor bias;
  };

  template <typename Bind>
  Var forward_impl(Tape& tape, const Var& x, Bind&& bind) const;
  void check_input(const Tensor& x) const;

  MlpSpec spec_;
  std::vector<Layer> layers_;
};

}  // namespace dppo::nd
