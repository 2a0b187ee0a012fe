#pragma once

#include <span>
#include <string>
#include <vector>

#include "dppo/nd/embedding.hpp"
#include "dppo/nd/mlp.hpp"

namespace dppo::diffusion {

struct NoisePredictorSpec {
  std::size_t obs_dim = 4;
  std::size_t chunk_dim = 8;
  std::size_t time_dim = 16;
  // State encoder obs -> state_features. Empty hidden list means one dense layer.
  std::vector<std::size_t> state_hidden{64};
  std::size_t state_features = 32;
  std::vector<std::size_t> head_hidden{128, 128, 128};
  nd::Activation activation = nd::Activation::kMish;
  bool residual = true;
};

// eps_theta(a^k, s, k): a sinusoidal embedding of k passes through a small
// MLP, the state through an encoder, and the head maps the concatenation
// [a^k, state features, time features] to the predicted noise.
class NoisePredictor {
 public:
  NoisePredictor() = default;
  NoisePredictor(NoisePredictorSpec spec, nd::Rng& rng);

  const NoisePredictorSpec& spec() const { return spec_; }

  // `levels` holds one denoising level per row.
  nd::Var forward(nd::Tape& tape, const nd::Tensor& a_k, const nd::Tensor& obs, std::span<const int> levels);
  nd::Var forward_frozen(nd::Tape& tape, const nd::Tensor& a_k, const nd::Tensor& obs,
                         std::span<const int> levels) const;
  // Bit-identical to forward().
  nd::Tensor infer(const nd::Tensor& a_k, const nd::Tensor& obs, std::span<const int> levels) const;

  std::vector<nd::NamedTensor> named_parameters(const std::string& prefix = "");
  std::size_t parameter_count() const;

 private:
  void check(const nd::Tensor& a_k, const nd::Tensor& obs, std::span<const int> levels) const;

  NoisePredictorSpec spec_;
  nd::TimeEmbedding embedding_;
  nd::MlpNet time_mlp_;
  nd::MlpNet state_mlp_;
  nd::MlpNet head_;
};

}  // namespace dppo::diffusion
