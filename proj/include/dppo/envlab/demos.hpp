#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dppo/envlab/avoid.hpp"
#include "dppo/envlab/normalizer.hpp"

namespace dppo::envlab {

enum class ModeSet { kM1, kM2, kM3 };

ModeSet mode_set_from_string(std::string_view name);
std::string_view to_string(ModeSet m);

// Corridor indices: 0 = bottom (y 0.2), 1 = middle (y 0.5), 2 = top (y 0.8).
double corridor_y(int corridor);

// A path family picks a corridor through each obstacle column.
struct Route {
  int first = 1;
  int second = 1;
};

// M1: middle->top and top->middle. M2: top->top and middle->middle.
// M3: top->top and bottom->bottom.
std::array<Route, 2> mode_routes(ModeSet m);

struct DemonstratorConfig {
  double jitter_std = 0.02;
  int max_retries = 200;
};

// Nominal waypoints of a route, before jitter.
std::vector<std::array<double, 2>> route_waypoints(const Route& r);

struct Episode {
  int family = 0;
  Event event = Event::kNone;
  std::vector<double> obs;      // length x 4
  std::vector<double> actions;  // length x 2, workspace units
  std::size_t length() const { return actions.size() / 2; }
};

struct DemoDataset {
  ModeSet mode_set = ModeSet::kM2;
  std::uint64_t seed = 0;
  nlohmann::json config;
  Normalizer normalizer;
  std::vector<Episode> episodes;
};

// Follows `waypoints` with the position servo: each tick commands the current
// waypoint and advances once it is reached.
Episode run_waypoints(const AvoidConfig& env_cfg, const std::vector<std::array<double, 2>>& waypoints);

// Episode i follows family i % 2. Waypoints get Gaussian jitter; jittered
// paths that collide or miss their family's goal event are redrawn.
DemoDataset generate_demos(ModeSet mode_set, int n_episodes, std::uint64_t seed, const DemonstratorConfig& demo = {},
                           const AvoidConfig& env = {});

}  // namespace dppo::envlab
