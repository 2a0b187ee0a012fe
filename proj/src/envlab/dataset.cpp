#include "dppo/envlab/dataset.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

namespace dppo::envlab {

using nlohmann::json;

ChunkSamples build_chunk_samples(const DemoDataset& ds, std::size_t T_p, std::size_t stride) {
  if (T_p < 1 || stride < 1) throw std::invalid_argument("build_chunk_samples: T_p and stride must be >= 1");
  std::vector<double> obs, act;
  std::vector<int> family;
  for (const Episode& ep : ds.episodes) {
    const std::size_t L = ep.length();
    for (std::size_t t = 0; t < L; t += stride) {
      obs.insert(obs.end(), ep.obs.begin() + 4 * t, ep.obs.begin() + 4 * (t + 1));
      for (std::size_t j = 0; j < T_p; ++j) {
        const std::size_t src = std::min(t + j, L - 1);
        act.push_back(ep.actions[2 * src]);
        act.push_back(ep.actions[2 * src + 1]);
      }
      family.push_back(ep.family);
    }
  }
  ds.normalizer.normalize_obs(obs);
  ds.normalizer.normalize_act(act);
  const std::size_t n = family.size();
  return {nd::Tensor({n, 4}, std::move(obs)), nd::Tensor({n, 2 * T_p}, std::move(act)), std::move(family)};
}

void save_dataset(const std::filesystem::path& path, const DemoDataset& ds) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path.string());
  json header = {{"kind", "dppo-demos"},
                 {"version", 1},
                 {"mode_set", std::string(to_string(ds.mode_set))},
                 {"seed", ds.seed},
                 {"config", ds.config},
                 {"normalizer", ds.normalizer.to_json()},
                 {"episodes", ds.episodes.size()}};
  out << header.dump() << '\n';
  for (const Episode& ep : ds.episodes) {
    json rec = {{"family", ep.family},
                {"event", std::string(to_string(ep.event))},
                {"obs", ep.obs},
                {"actions", ep.actions}};
    out << rec.dump() << '\n';
  }
  if (!out) throw std::runtime_error("save_dataset: write failed for " + path.string());
}

DemoDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_dataset: empty file");
  const json header = json::parse(line);
  if (header.value("kind", "") != "dppo-demos") throw std::runtime_error("load_dataset: not a demo dataset");
  DemoDataset ds;
  ds.mode_set = mode_set_from_string(header.at("mode_set").get<std::string>());
  ds.seed = header.at("seed").get<std::uint64_t>();
  ds.config = header.at("config");
  ds.normalizer = Normalizer::from_json(header.at("normalizer"));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    Episode ep;
    ep.family = rec.at("family").get<int>();
    ep.event = event_from_string(rec.at("event").get<std::string>());
    ep.obs = rec.at("obs").get<std::vector<double>>();
    ep.actions = rec.at("actions").get<std::vector<double>>();
    if (ep.actions.empty() || ep.actions.size() % 2 != 0 || ep.obs.size() != 2 * ep.actions.size()) {
      throw std::runtime_error("load_dataset: malformed episode " + std::to_string(ds.episodes.size()));
    }
    ds.episodes.push_back(std::move(ep));
  }
  if (ds.episodes.size() != header.at("episodes").get<std::size_t>()) {
    throw std::runtime_error("load_dataset: episode count does not match header");
  }
  return ds;
}

void save_trajectories(const std::filesystem::path& path, const std::vector<EpisodeRecord>& episodes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_trajectories: cannot open " + path.string());
  for (const EpisodeRecord& ep : episodes) {
    json rec = {{"positions", ep.positions},
                {"targets", ep.targets},
                {"reward", ep.reward},
                {"event", std::string(to_string(ep.event))}};
    out << rec.dump() << '\n';
  }
}

std::vector<EpisodeRecord> load_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_trajectories: cannot open " + path.string());
  std::vector<EpisodeRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json rec = json::parse(line);
      EpisodeRecord ep;
      ep.positions = rec.at("positions").get<std::vector<double>>();
      ep.targets = rec.at("targets").get<std::vector<double>>();
      ep.reward = rec.at("reward").get<double>();
      ep.event = event_from_string(rec.at("event").get<std::string>());
      if (ep.positions.size() % 2 != 0 || ep.targets.size() % 2 != 0) throw std::runtime_error("odd coordinate count");
      out.push_back(std::move(ep));
    } catch (const std::exception& e) {
      throw std::runtime_error("load_trajectories: line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace dppo::envlab
