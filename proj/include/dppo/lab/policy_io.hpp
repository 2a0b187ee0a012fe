#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "json.hpp"

#include "dppo/baselines/gaussian.hpp"
#include "dppo/diffusion/policy.hpp"
#include "dppo/envlab/normalizer.hpp"
#include "dppo/envlab/runner.hpp"
#include "dppo/lab/config.hpp"

namespace dppo::lab {

// A policy of either kind together with the normalizer it was trained under.
struct PolicyBundle {
  PolicyKind kind = PolicyKind::kDiffusion;
  std::optional<diffusion::DiffusionPolicy> diffusion;
  std::optional<baselines::GaussianPolicy> gaussian;
  envlab::Normalizer norm;

  std::size_t T_p() const;
  std::size_t T_a() const;
  // Evaluation-mode sampler (diffusion noise floor, Gaussian mean).
  envlab::ChunkSampler eval_sampler() const;
  std::vector<nd::NamedTensor> named_parameters();
};

// Writes <stem>.json / <stem>.bin. `extra` (any tensors beyond the policy's,
// e.g. a critic) is appended to the payload.
void save_policy(const std::filesystem::path& stem, PolicyBundle& bundle, const nlohmann::json& run_echo,
                 std::uint64_t seed, std::span<const nd::NamedTensor> extra = {});
PolicyBundle load_policy(const std::filesystem::path& stem);

// Rebuilds a diffusion policy under a modified config, keeping its weights.
// Changing K, T_p, the network or the sampler is rejected; so is changing
// K' of an already split policy.
diffusion::DiffusionPolicy reconfigure(const diffusion::DiffusionPolicy& p, const diffusion::PolicyConfig& cfg);

}  // namespace dppo::lab
