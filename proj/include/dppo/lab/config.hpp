#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dppo/baselines/gaussian.hpp"
#include "dppo/baselines/weighted_regression.hpp"
#include "dppo/diffusion/policy.hpp"
#include "dppo/envlab/demos.hpp"
#include "dppo/envlab/runner.hpp"
#include "dppo/lab/pretrain.hpp"
#include "dppo/rl/dppo_trainer.hpp"

namespace dppo::lab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PolicyKind { kDiffusion, kGaussian };
enum class Method { kDppo, kGaussianPpo, kDrwr, kDawr };

PolicyKind policy_kind_from_string(std::string_view s);
std::string_view to_string(PolicyKind k);
Method method_from_string(std::string_view s);
std::string_view to_string(Method m);

struct EnvSection {
  envlab::ModeSet mode_set = envlab::ModeSet::kM2;
  int n_demos = 50;
  double jitter_std = 0.02;
  int horizon = 100;
  double max_step = 0.04;
  double goal_line_x = 0.9;
  double top_mode_y = 0.65;
  std::size_t n_envs = 50;

  envlab::AvoidConfig avoid() const;
};

struct PretrainSection {
  PolicyKind policy = PolicyKind::kDiffusion;
  std::string dataset;  // empty: <out>/demos.jsonl
  // Unset: 10000 for diffusion, 5000 for Gaussian.
  std::optional<int> epochs;
  PretrainConfig train;
  int eval_every = 0;  // epochs between evaluations, 0 only at the end
  std::size_t eval_episodes = 100;

  int resolved_epochs() const;
};

struct FinetuneSection {
  Method method = Method::kDppo;
  // "{seed}" is replaced by the run seed; empty means <out>/policy.
  std::string checkpoint;
  // Overrides of the checkpoint's policy settings.
  std::optional<int> k_prime;
  std::optional<double> sigma_exp_min;
  std::optional<std::size_t> T_a;
  int checkpoint_every = 0;  // iterations between snapshots in ckpt/, 0 for none
  rl::DppoConfig dppo;
};

struct AblationSection {
  // "", "K_prime", "sigma_exp_min", "T_a" or "gamma_denoise".
  std::string sweep;
  std::vector<double> values;
};

struct EvalSection {
  // "scripted" evaluates the top-route oracle; empty means <out>/finetuned.
  std::string checkpoint;
  std::size_t episodes = 100;
  double noise_lo = 0.0;
  double noise_hi = 0.0;
  bool trajectories = true;
};

struct PlotSection {
  std::vector<std::string> inputs;
  std::string output;  // empty: <out>/trajectories.svg
};

struct ReportSection {
  std::vector<std::string> runs;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "runs/default";
  EnvSection env;
  diffusion::PolicyConfig policy;
  baselines::GaussianConfig gaussian;
  PretrainSection pretrain;
  FinetuneSection finetune;
  baselines::WrConfig baseline;
  envlab::NoiseInjection noise;
  AblationSection ablation;
  EvalSection eval;
  PlotSection plot;
  ReportSection report;

  envlab::RunnerConfig runner() const;
};

// Strict: unknown keys and type mismatches throw ConfigError naming the key path.
RunConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

// DPPO_SEED and DPPO_OUT.
void apply_env_overrides(RunConfig& c);

nlohmann::json to_json(const diffusion::PolicyConfig& c);
diffusion::PolicyConfig policy_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const baselines::GaussianConfig& c);
baselines::GaussianConfig gaussian_config_from_json(const nlohmann::json& j);

// FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

}  // namespace dppo::lab
