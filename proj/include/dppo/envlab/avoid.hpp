#pragma once

#include <array>
#include <string_view>
#include <vector>

namespace dppo::envlab {

struct Circle {
  double x = 0.0;
  double y = 0.0;
  double r = 0.0;
};

// Two columns of four circles at x = 0.35 and x = 0.62; the gaps between them
// are corridors centered at y = 0.2, 0.5 and 0.8.
std::vector<Circle> default_obstacles();

struct AvoidConfig {
  std::array<double, 2> start{0.05, 0.5};
  std::vector<Circle> obstacles = default_obstacles();
  double goal_line_x = 0.9;
  double top_mode_y = 0.65;
  double max_step = 0.04;
  int horizon = 100;
};

enum class Event { kNone, kCollision, kGoalTop, kGoalOther, kTimeout };

std::string_view to_string(Event e);
Event event_from_string(std::string_view name);

// Observation: (pos_x, pos_y, prev_target_x, prev_target_y).
using Obs = std::array<double, 4>;

struct StepResult {
  Obs obs{};
  double reward = 0.0;
  bool done = false;
  // Episode cut by the horizon rather than a terminal event.
  bool truncated = false;
  Event event = Event::kNone;
};

// Distance from point (px, py) to the segment (ax, ay)-(bx, by).
double segment_point_distance(double ax, double ay, double bx, double by, double px, double py);

// 2D point robot that servos toward a commanded target position. Each tick it
// moves straight toward the target by at most max_step. Targets and
// positions live in workspace units on [0, 1]^2.
class AvoidEnv {
 public:
  explicit AvoidEnv(AvoidConfig cfg = {});

  const AvoidConfig& config() const { return cfg_; }
  Obs reset();
  StepResult step(double target_x, double target_y);

  Obs observation() const;
  std::array<double, 2> position() const { return pos_; }
  int tick() const { return t_; }
  bool done() const { return done_; }

 private:
  AvoidConfig cfg_;
  std::array<double, 2> pos_{};
  std::array<double, 2> prev_target_{};
  int t_ = 0;
  bool done_ = false;
};

}  // namespace dppo::envlab
