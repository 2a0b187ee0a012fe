#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace dppo::lab {

// Written by finetune next to train.csv.
struct RunSummary {
  std::filesystem::path dir;
  std::string label;
  std::string method;
  std::uint64_t seed = 0;
  std::string config_hash;
  double pretrained_success = 0.0;
  double final_success = 0.0;
  int iterations = 0;
  std::uint64_t env_steps = 0;
  bool reached_target = false;
  // (iteration, eval success) pairs from train.csv.
  std::vector<std::pair<int, double>> curve;

  nlohmann::json to_json() const;
};

struct GroupSummary {
  std::string label;
  std::string method;
  std::vector<RunSummary> runs;
  double pretrained_mean = 0.0;
  double final_mean = 0.0;
  double final_std = 0.0;  // sample std, 0 for a single run
  // Mean eval success over runs; runs that stopped early carry their last value.
  std::vector<std::pair<int, double>> curve;
};

struct ExperimentReport {
  std::vector<GroupSummary> groups;
  nlohmann::json to_json() const;
};

// Reads <dir>/run.json and the eval column of <dir>/train.csv.
RunSummary read_run(const std::filesystem::path& dir);
// Every directory under `root` (inclusive) holding a run.json, sorted.
std::vector<std::filesystem::path> discover_runs(const std::filesystem::path& root);
// Groups by label in first-seen order of the sorted directories.
ExperimentReport build_report(const std::vector<std::filesystem::path>& run_dirs);
// report.json, report.csv and curves.svg.
void write_report(const std::filesystem::path& out_dir, const ExperimentReport& report);

}  // namespace dppo::lab
