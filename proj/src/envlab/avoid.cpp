#include "dppo/envlab/avoid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dppo::envlab {

std::vector<Circle> default_obstacles() {
  std::vector<Circle> out;
  for (double x : {0.35, 0.62}) {
    for (double y : {0.05, 0.35, 0.65, 0.95}) out.push_back({x, y, 0.06});
  }
  return out;
}

std::string_view to_string(Event e) {
  switch (e) {
    case Event::kNone:
      return "none";
    case Event::kCollision:
      return "collision";
    case Event::kGoalTop:
      return "goal_top";
    case Event::kGoalOther:
      return "goal_other";
    case Event::kTimeout:
      return "timeout";
  }
  return "none";
}

Event event_from_string(std::string_view name) {
  for (Event e : {Event::kNone, Event::kCollision, Event::kGoalTop, Event::kGoalOther, Event::kTimeout}) {
    if (to_string(e) == name) return e;
  }
  throw std::invalid_argument("unknown event '" + std::string(name) + "'");
}

double segment_point_distance(double ax, double ay, double bx, double by, double px, double py) {
  const double dx = bx - ax;
  const double dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double u = 0.0;
  if (len2 > 0.0) u = std::clamp(((px - ax) * dx + (py - ay) * dy) / len2, 0.0, 1.0);
  const double cx = ax + u * dx - px;
  const double cy = ay + u * dy - py;
  return std::sqrt(cx * cx + cy * cy);
}

AvoidEnv::AvoidEnv(AvoidConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.max_step <= 0 || cfg_.horizon < 1) throw std::invalid_argument("AvoidEnv: bad config");
  reset();
}

Obs AvoidEnv::reset() {
  pos_ = cfg_.start;
  prev_target_ = cfg_.start;
  t_ = 0;
  done_ = false;
  return observation();
}

Obs AvoidEnv::observation() const { return {pos_[0], pos_[1], prev_target_[0], prev_target_[1]}; }

StepResult AvoidEnv::step(double target_x, double target_y) {
  if (done_) throw std::logic_error("AvoidEnv::step after episode end; call reset()");
  if (!std::isfinite(target_x) || !std::isfinite(target_y)) throw std::invalid_argument("AvoidEnv: non-finite target");
  const double tx = std::clamp(target_x, 0.0, 1.0);
  const double ty = std::clamp(target_y, 0.0, 1.0);
  const double dx = tx - pos_[0];
  const double dy = ty - pos_[1];
  const double dist = std::sqrt(dx * dx + dy * dy);
  const double scale = dist > cfg_.max_step ? cfg_.max_step / dist : 1.0;
  const std::array<double, 2> from = pos_;
  const std::array<double, 2> to{std::clamp(from[0] + scale * dx, 0.0, 1.0),
                                 std::clamp(from[1] + scale * dy, 0.0, 1.0)};
  pos_ = to;
  prev_target_ = {tx, ty};
  ++t_;

  StepResult res;
  for (const Circle& c : cfg_.obstacles) {
    if (segment_point_distance(from[0], from[1], to[0], to[1], c.x, c.y) < c.r) {
      res.event = Event::kCollision;
      break;
    }
  }
  if (res.event == Event::kNone && from[0] < cfg_.goal_line_x && to[0] >= cfg_.goal_line_x) {
    const double u = (cfg_.goal_line_x - from[0]) / (to[0] - from[0]);
    const double y_cross = from[1] + u * (to[1] - from[1]);
    res.event = y_cross >= cfg_.top_mode_y ? Event::kGoalTop : Event::kGoalOther;
    res.reward = res.event == Event::kGoalTop ? 1.0 : 0.0;
  }
  if (res.event == Event::kNone && t_ >= cfg_.horizon) {
    res.event = Event::kTimeout;
    res.truncated = true;
  }
  res.done = res.event != Event::kNone;
  done_ = res.done;
  res.obs = observation();
  return res;
}

}  // namespace dppo::envlab
