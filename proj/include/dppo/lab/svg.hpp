#pragma once

#include <string>
#include <vector>

#include "dppo/envlab/avoid.hpp"
#include "dppo/envlab/dataset.hpp"

namespace dppo::lab {

// Workspace board (obstacles, goal line, top-mode threshold) with one <path>
// per trajectory, colored by its final event. Output depends only on the input.
std::string trajectories_svg(const envlab::AvoidConfig& env, const std::vector<envlab::EpisodeRecord>& episodes);

struct Curve {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Line chart of success curves on a [0, 1] y-axis.
std::string curves_svg(const std::vector<Curve>& curves, const std::string& x_label);

}  // namespace dppo::lab
