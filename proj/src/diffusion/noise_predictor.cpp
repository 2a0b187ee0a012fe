#include "dppo/diffusion/noise_predictor.hpp"

namespace dppo::diffusion {

using nd::Tensor;
using nd::Var;

NoisePredictor::NoisePredictor(NoisePredictorSpec spec, nd::Rng& rng)
    : spec_(std::move(spec)),
      embedding_(spec_.time_dim),
      time_mlp_({spec_.time_dim, {2 * spec_.time_dim}, spec_.time_dim, spec_.activation, false}, rng),
      state_mlp_({spec_.obs_dim, spec_.state_hidden, spec_.state_features, spec_.activation, false}, rng),
      head_({spec_.chunk_dim + spec_.state_features + spec_.time_dim, spec_.head_hidden, spec_.chunk_dim,
             spec_.activation, spec_.residual},
            rng) {}

void NoisePredictor::check(const Tensor& a_k, const Tensor& obs, std::span<const int> levels) const {
  if (a_k.rank() != 2 || a_k.cols() != spec_.chunk_dim) {
    throw nd::ShapeError("NoisePredictor: chunk has shape " + nd::shape_string(a_k.shape()));
  }
  if (obs.rank() != 2 || obs.rows() != a_k.rows() || obs.cols() != spec_.obs_dim) {
    throw nd::ShapeError("NoisePredictor: obs has shape " + nd::shape_string(obs.shape()));
  }
  if (levels.size() != a_k.rows()) throw nd::ShapeError("NoisePredictor: one level per row required");
}

Var NoisePredictor::forward(nd::Tape& tape, const Tensor& a_k, const Tensor& obs, std::span<const int> levels) {
  check(a_k, obs, levels);
  Var t = time_mlp_.forward(tape, tape.constant(embedding_.embed(levels)));
  Var s = state_mlp_.forward(tape, tape.constant(obs));
  return head_.forward(tape, nd::concat_cols({tape.constant(a_k), s, t}));
}

Var NoisePredictor::forward_frozen(nd::Tape& tape, const Tensor& a_k, const Tensor& obs,
                                   std::span<const int> levels) const {
  check(a_k, obs, levels);
  Var t = time_mlp_.forward_frozen(tape, tape.constant(embedding_.embed(levels)));
  Var s = state_mlp_.forward_frozen(tape, tape.constant(obs));
  return head_.forward_frozen(tape, nd::concat_cols({tape.constant(a_k), s, t}));
}

Tensor NoisePredictor::infer(const Tensor& a_k, const Tensor& obs, std::span<const int> levels) const {
  check(a_k, obs, levels);
  const Tensor t = time_mlp_.infer(embedding_.embed(levels));
  const Tensor s = state_mlp_.infer(obs);
  const std::size_t rows = a_k.rows();
  const std::size_t width = spec_.chunk_dim + spec_.state_features + spec_.time_dim;
  Tensor cat = Tensor::matrix(rows, width);
  for (std::size_t i = 0; i < rows; ++i) {
    auto dst = cat.row(i).begin();
    dst = std::copy(a_k.row(i).begin(), a_k.row(i).end(), dst);
    dst = std::copy(s.row(i).begin(), s.row(i).end(), dst);
    std::copy(t.row(i).begin(), t.row(i).end(), dst);
  }
  return head_.infer(cat);
}

std::vector<nd::NamedTensor> NoisePredictor::named_parameters(const std::string& prefix) {
  std::vector<nd::NamedTensor> out = time_mlp_.named_parameters(prefix + "time.");
  for (auto& p : state_mlp_.named_parameters(prefix + "state.")) out.push_back(p);
  for (auto& p : head_.named_parameters(prefix + "head.")) out.push_back(p);
  return out;
}

std::size_t NoisePredictor::parameter_count() const {
  return time_mlp_.parameter_count() + state_mlp_.parameter_count() + head_.parameter_count();
}

}  // namespace dppo::diffusion
