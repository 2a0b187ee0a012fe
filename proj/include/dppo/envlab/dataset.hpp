#pragma once

#include <filesystem>
#include <vector>

#include "dppo/envlab/demos.hpp"
#include "dppo/nd/tensor.hpp"

namespace dppo::envlab {

// Normalized training pairs. Row i of `actions` is the flattened chunk of
// T_p consecutive actions starting at the observation in row i.
struct ChunkSamples {
  nd::Tensor obs;
  nd::Tensor actions;
  std::vector<int> family;
};

// Chunk starts are taken every `stride` ticks; chunks running past the end
// of an episode repeat its final action.
ChunkSamples build_chunk_samples(const DemoDataset& ds, std::size_t T_p, std::size_t stride);

// JSON lines: one header record, then one record per episode.
void save_dataset(const std::filesystem::path& path, const DemoDataset& ds);
DemoDataset load_dataset(const std::filesystem::path& path);

// Recorded rollout episode in workspace units.
struct EpisodeRecord {
  std::vector<double> positions;  // (length + 1) x 2, starting at the start position
  std::vector<double> targets;    // length x 2
  double reward = 0.0;
  Event event = Event::kNone;
  std::size_t length() const { return targets.size() / 2; }
};

void save_trajectories(const std::filesystem::path& path, const std::vector<EpisodeRecord>& episodes);
std::vector<EpisodeRecord> load_trajectories(const std::filesystem::path& path);

}  // namespace dppo::envlab
