#pragma once

#include "dppo/diffusion/policy.hpp"
#include "dppo/envlab/runner.hpp"

namespace dppo::rl {

// Chunk sampler backed by a diffusion policy; the payload is the DenoiseTrace.
// The policy must outlive the sampler.
envlab::ChunkSampler diffusion_sampler(const diffusion::DiffusionPolicy& policy, diffusion::SampleMode mode);

// Fresh evaluation episodes with the evaluation noise floor (and eta_eval
// for DDIM).
envlab::EvalSummary evaluate_diffusion(const diffusion::DiffusionPolicy& policy, const envlab::Normalizer& norm,
                                       const envlab::RunnerConfig& rc, std::size_t n_episodes,
                                       envlab::NoiseBand band = {});

}  // namespace dppo::rl
