#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "dppo/rl/on_policy.hpp"

namespace dppo::rl {

inline constexpr const char* kTrainLogVersion = "# dppo-train-log v1";

// CSV training log shared by DPPO and the baselines.
class TrainLog {
 public:
  explicit TrainLog(const std::filesystem::path& path);
  void write(const IterationStats& s);

  static std::string header();
  static std::string format_row(const IterationStats& s);

 private:
  std::ofstream out_;
};

}  // namespace dppo::rl
