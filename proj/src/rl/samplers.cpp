#include "dppo/rl/samplers.hpp"

#include "dppo/diffusion/sampler.hpp"

namespace dppo::rl {

envlab::ChunkSampler diffusion_sampler(const diffusion::DiffusionPolicy& policy, diffusion::SampleMode mode) {
  return [&policy, mode](const nd::Tensor& obs, std::span<nd::Rng> rngs) {
    diffusion::DenoiseTrace trace = diffusion::sample_chunk(policy, obs, rngs, mode);
    nd::Tensor chunk = trace.action;
    return envlab::ChunkDecision{std::move(chunk), std::move(trace)};
  };
}

envlab::EvalSummary evaluate_diffusion(const diffusion::DiffusionPolicy& policy, const envlab::Normalizer& norm,
                                       const envlab::RunnerConfig& rc, std::size_t n_episodes,
                                       envlab::NoiseBand band) {
  return envlab::run_episodes(rc, norm, diffusion_sampler(policy, diffusion::SampleMode::kEval), n_episodes, band);
}

}  // namespace dppo::rl
