#include "dppo/envlab/demos.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dppo/nd/rng.hpp"

namespace dppo::envlab {

ModeSet mode_set_from_string(std::string_view name) {
  if (name == "M1") return ModeSet::kM1;
  if (name == "M2") return ModeSet::kM2;
  if (name == "M3") return ModeSet::kM3;
  throw std::invalid_argument("unknown mode set '" + std::string(name) + "'");
}

std::string_view to_string(ModeSet m) {
  switch (m) {
    case ModeSet::kM1:
      return "M1";
    case ModeSet::kM2:
      return "M2";
    case ModeSet::kM3:
      return "M3";
  }
  return "M2";
}

double corridor_y(int corridor) {
  static constexpr double kY[3] = {0.2, 0.5, 0.8};
  if (corridor < 0 || corridor > 2) throw std::out_of_range("corridor index");
  return kY[corridor];
}

std::array<Route, 2> mode_routes(ModeSet m) {
  switch (m) {
    case ModeSet::kM1:
      return {Route{1, 2}, Route{2, 1}};
    case ModeSet::kM2:
      return {Route{2, 2}, Route{1, 1}};
    case ModeSet::kM3:
      return {Route{2, 2}, Route{0, 0}};
  }
  return {Route{2, 2}, Route{1, 1}};
}

std::vector<std::array<double, 2>> route_waypoints(const Route& r) {
  const double y1 = corridor_y(r.first);
  const double y2 = corridor_y(r.second);
  return {{0.22, y1}, {0.485, y1}, {0.485, y2}, {0.75, y2}, {0.95, y2}};
}

Episode run_waypoints(const AvoidConfig& env_cfg, const std::vector<std::array<double, 2>>& waypoints) {
  AvoidEnv env(env_cfg);
  Episode ep;
  std::size_t w = 0;
  while (!env.done()) {
    const auto pos = env.position();
    while (w + 1 < waypoints.size() && std::hypot(waypoints[w][0] - pos[0], waypoints[w][1] - pos[1]) < 1e-9) ++w;
    const Obs o = env.observation();
    ep.obs.insert(ep.obs.end(), o.begin(), o.end());
    ep.actions.push_back(waypoints[w][0]);
    ep.actions.push_back(waypoints[w][1]);
    const StepResult r = env.step(waypoints[w][0], waypoints[w][1]);
    ep.event = r.event;
  }
  return ep;
}

DemoDataset generate_demos(ModeSet mode_set, int n_episodes, std::uint64_t seed, const DemonstratorConfig& demo,
                           const AvoidConfig& env) {
  if (n_episodes < 1) throw std::invalid_argument("generate_demos: need at least one episode");
  const auto routes = mode_routes(mode_set);
  nd::Rng rng(seed);
  DemoDataset ds;
  ds.mode_set = mode_set;
  ds.seed = seed;
  ds.config = {{"mode_set", std::string(to_string(mode_set))},
               {"n_episodes", n_episodes},
               {"jitter_std", demo.jitter_std},
               {"max_retries", demo.max_retries}};
  for (int i = 0; i < n_episodes; ++i) {
    const int family = i % 2;
    const Route route = routes[family];
    const Event want = corridor_y(route.second) >= env.top_mode_y ? Event::kGoalTop : Event::kGoalOther;
    bool ok = false;
    for (int attempt = 0; attempt < demo.max_retries && !ok; ++attempt) {
      auto wps = route_waypoints(route);
      // The final waypoint only sets the crossing direction; leave it fixed.
      for (std::size_t k = 0; k + 1 < wps.size(); ++k) {
        wps[k][0] += demo.jitter_std * rng.normal();
        wps[k][1] += demo.jitter_std * rng.normal();
      }
      wps[1][0] = wps[2][0];  // keep the column-to-column move vertical
      Episode ep = run_waypoints(env, wps);
      if (ep.event == want) {
        ep.family = family;
        ds.episodes.push_back(std::move(ep));
        ok = true;
      }
    }
    if (!ok) throw std::runtime_error("generate_demos: jitter kept producing failed paths; lower jitter_std");
  }
  std::vector<double> obs, act;
  for (const Episode& ep : ds.episodes) {
    obs.insert(obs.end(), ep.obs.begin(), ep.obs.end());
    act.insert(act.end(), ep.actions.begin(), ep.actions.end());
  }
  ds.normalizer = Normalizer::fit(obs, 4, act, 2);
  return ds;
}

}  // namespace dppo::envlab
