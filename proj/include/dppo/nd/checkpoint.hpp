#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "json.hpp"

#include "dppo/nd/mlp.hpp"

namespace dppo::nd {

// A checkpoint is a pair of files sharing a stem: `<stem>.json` holds the
// manifest (per tensor: name, shape, dtype, byte offset; plus the config echo
// and seed) and `<stem>.bin` the raw little-endian float64 payload.
struct Checkpoint {
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::filesystem::path& stem, std::span<const NamedTensor> tensors,
                     const nlohmann::json& config, std::uint64_t seed);
Checkpoint load_checkpoint(const std::filesystem::path& stem);

// Copies checkpoint tensors into `into` by name. Missing names or shape
// mismatches throw; extra checkpoint entries are ignored unless `strict`.
void restore_tensors(const Checkpoint& ckpt, std::span<const NamedTensor> into, bool strict = false);

}  // namespace dppo::nd
