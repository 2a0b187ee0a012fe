#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dppo/envlab/runner.hpp"
#include "dppo/lab/config.hpp"
#include "dppo/rl/on_policy.hpp"

namespace dppo::lab {

// Files inside a run directory. Each command also writes its resolved config
// to <command>.config.json, so commands sharing a directory keep their echoes.
inline constexpr const char* kDemos = "demos.jsonl";
inline constexpr const char* kPolicyStem = "policy";
inline constexpr const char* kPretrainCsv = "pretrain_loss.csv";
inline constexpr const char* kPretrainEvalCsv = "pretrain_eval.csv";
inline constexpr const char* kTrainCsv = "train.csv";
inline constexpr const char* kFinetunedStem = "finetuned";
inline constexpr const char* kRunJson = "run.json";
inline constexpr const char* kEvalJson = "eval.json";
inline constexpr const char* kTrajectories = "trajectories.jsonl";
inline constexpr const char* kTrajectorySvg = "trajectories.svg";

inline constexpr const char* kPretrainLogVersion = "# dppo-pretrain-log v1";

// Thrown for bad inputs (missing files, incompatible checkpoints); the CLI
// reports it like a config error.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PretrainResult {
  std::vector<double> losses;
  envlab::EvalSummary eval;  // final deterministic evaluation
};

struct FinetuneResult {
  std::filesystem::path dir;
  std::vector<rl::IterationStats> stats;
  double pretrained_success = 0.0;
  envlab::EvalSummary final_eval;
};

std::filesystem::path echo_path(const std::filesystem::path& out, const std::string& command);

void cmd_gen_demos(const RunConfig& cfg);
PretrainResult cmd_pretrain(const RunConfig& cfg);
// One result per ablation value, or one when no sweep is configured.
std::vector<FinetuneResult> cmd_finetune(const RunConfig& cfg);
envlab::EvalSummary cmd_eval(const RunConfig& cfg);
void cmd_plot(const RunConfig& cfg);
void cmd_report(const RunConfig& cfg);

// "{seed}" in `pattern` replaced by the decimal seed.
std::string with_seed(std::string pattern, std::uint64_t seed);

// Entry point of the dppo_lab tool. Errors go to stderr as one JSON line
// {"error": kind, "message": text}; exit code 2 for usage/config/input
// errors, 1 for runtime failures.
int run_cli(int argc, char** argv);

}  // namespace dppo::lab
