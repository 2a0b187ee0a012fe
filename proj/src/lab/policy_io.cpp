#include "dppo/lab/policy_io.hpp"

#include <stdexcept>

#include "dppo/nd/checkpoint.hpp"
#include "dppo/rl/samplers.hpp"

namespace dppo::lab {

std::size_t PolicyBundle::T_p() const { return diffusion ? diffusion->config().T_p : gaussian->config().T_p; }
std::size_t PolicyBundle::T_a() const { return diffusion ? diffusion->config().T_a : gaussian->config().T_a; }

envlab::ChunkSampler PolicyBundle::eval_sampler() const {
  if (diffusion) return rl::diffusion_sampler(*diffusion, diffusion::SampleMode::kEval);
  return baselines::gaussian_sampler(*gaussian, true);
}

std::vector<nd::NamedTensor> PolicyBundle::named_parameters() {
  return diffusion ? diffusion->named_parameters() : gaussian->named_parameters();
}

void save_policy(const std::filesystem::path& stem, PolicyBundle& bundle, const nlohmann::json& run_echo,
                 std::uint64_t seed, std::span<const nd::NamedTensor> extra) {
  nlohmann::json cfg;
  cfg["kind"] = to_string(bundle.kind);
  if (bundle.diffusion) {
    cfg["policy"] = to_json(bundle.diffusion->config());
    cfg["split"] = bundle.diffusion->is_split();
  } else {
    cfg["gaussian"] = to_json(bundle.gaussian->config());
  }
  cfg["normalizer"] = bundle.norm.to_json();
  cfg["run"] = run_echo;
  std::vector<nd::NamedTensor> tensors = bundle.named_parameters();
  tensors.insert(tensors.end(), extra.begin(), extra.end());
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  nd::save_checkpoint(stem, tensors, cfg, seed);
}

PolicyBundle load_policy(const std::filesystem::path& stem) {
  const nd::Checkpoint ck = nd::load_checkpoint(stem);
  PolicyBundle b;
  try {
    b.kind = policy_kind_from_string(ck.config.at("kind").get<std::string>());
    b.norm = envlab::Normalizer::from_json(ck.config.at("normalizer"));
    if (b.kind == PolicyKind::kDiffusion) {
      b.diffusion.emplace(policy_config_from_json(ck.config.at("policy")), ck.seed);
      if (ck.config.value("split", false)) b.diffusion->split_finetune_weights();
    } else {
      b.gaussian.emplace(gaussian_config_from_json(ck.config.at("gaussian")), ck.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint '" + stem.string() + "': bad manifest: " + e.what());
  }
  nd::restore_tensors(ck, b.named_parameters());
  return b;
}

diffusion::DiffusionPolicy reconfigure(const diffusion::DiffusionPolicy& p, const diffusion::PolicyConfig& cfg) {
  const diffusion::PolicyConfig& old = p.config();
  if (cfg.K != old.K || cfg.T_p != old.T_p || cfg.act_dim != old.act_dim || cfg.sampler != old.sampler ||
      cfg.ddim_steps != old.ddim_steps || cfg.schedule_s != old.schedule_s ||
      nlohmann::json(to_json(cfg))["net"] != nlohmann::json(to_json(old))["net"]) {
    throw std::invalid_argument("reconfigure: only K', T_a, eta and sigma floors may change");
  }
  if (p.is_split() && cfg.K_prime != old.K_prime) {
    throw std::invalid_argument("reconfigure: K' of a fine-tuned checkpoint cannot change");
  }
  diffusion::DiffusionPolicy out(cfg, 0);
  if (p.is_split()) out.split_finetune_weights();
  diffusion::DiffusionPolicy copy = p;
  auto src = copy.named_parameters();
  auto dst = out.named_parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i].tensor->storage() = src[i].tensor->storage();
  return out;
}

}  // namespace dppo::lab
