#include "dppo/lab/svg.hpp"

#include <algorithm>
#include <cstdio>

namespace dppo::lab {

namespace {

constexpr double kSize = 400.0;
constexpr double kPad = 20.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

double sx(double x) { return kPad + x * kSize; }
// SVG y grows downward; the workspace y grows upward.
double sy(double y) { return kPad + (1.0 - y) * kSize; }

const char* event_color(envlab::Event e) {
  switch (e) {
    case envlab::Event::kGoalTop: return "#2a9d3f";
    case envlab::Event::kGoalOther: return "#2b6cb0";
    case envlab::Event::kCollision: return "#d1342f";
    case envlab::Event::kTimeout: return "#8a8a8a";
    case envlab::Event::kNone: return "#b07b00";
  }
  return "#000000";
}

const char* palette(std::size_t i) {
  static const char* colors[] = {"#2a9d3f", "#d1342f", "#2b6cb0", "#b07b00", "#7b3fa0", "#1a9a9a", "#555555"};
  return colors[i % (sizeof colors / sizeof colors[0])];
}

std::string xml_escape(const std::string& in) {
  std::string out;
  for (char c : in) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string trajectories_svg(const envlab::AvoidConfig& env, const std::vector<envlab::EpisodeRecord>& episodes) {
  const double side = kSize + 2 * kPad;
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(side) + "\" height=\"" + fmt(side) +
                  "\" viewBox=\"0 0 " + fmt(side) + " " + fmt(side) + "\">\n";
  s += "<rect x=\"" + fmt(kPad) + "\" y=\"" + fmt(kPad) + "\" width=\"" + fmt(kSize) + "\" height=\"" + fmt(kSize) +
       "\" fill=\"#ffffff\" stroke=\"#000000\"/>\n";
  for (const auto& c : env.obstacles) {
    s += "<circle cx=\"" + fmt(sx(c.x)) + "\" cy=\"" + fmt(sy(c.y)) + "\" r=\"" + fmt(c.r * kSize) +
         "\" fill=\"#cccccc\"/>\n";
  }
  s += "<line x1=\"" + fmt(sx(env.goal_line_x)) + "\" y1=\"" + fmt(sy(0)) + "\" x2=\"" + fmt(sx(env.goal_line_x)) +
       "\" y2=\"" + fmt(sy(1)) + "\" stroke=\"#000000\" stroke-dasharray=\"4 3\"/>\n";
  s += "<line x1=\"" + fmt(sx(env.goal_line_x)) + "\" y1=\"" + fmt(sy(env.top_mode_y)) + "\" x2=\"" + fmt(sx(1)) +
       "\" y2=\"" + fmt(sy(env.top_mode_y)) + "\" stroke=\"#2a9d3f\"/>\n";
  for (const auto& e : episodes) {
    std::string d;
    for (std::size_t i = 0; 2 * i + 1 < e.positions.size(); ++i) {
      d += (i == 0 ? "M" : " L") + fmt(sx(e.positions[2 * i])) + " " + fmt(sy(e.positions[2 * i + 1]));
    }
    s += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + event_color(e.event) +
         "\" stroke-width=\"1.2\" stroke-opacity=\"0.7\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string curves_svg(const std::vector<Curve>& curves, const std::string& x_label) {
  const double w = 560, h = 320, left = 50, right = 160, top = 20, bottom = 40;
  const double pw = w - left - right, ph = h - top - bottom;
  double xmax = 1.0;
  for (const auto& c : curves)
    for (double x : c.x) xmax = std::max(xmax, x);
  auto px = [&](double x) { return left + x / xmax * pw; };
  auto py = [&](double y) { return top + (1.0 - std::clamp(y, 0.0, 1.0)) * ph; };
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) + "\">\n";
  s += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
       "\" fill=\"none\" stroke=\"#000000\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = t / 4.0;
    s += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(py(y) + 4) + "\" font-size=\"10\" text-anchor=\"end\">" +
         fmt(y) + "</text>\n";
  }
  s += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(h - 8) + "\" font-size=\"11\" text-anchor=\"middle\">" +
       xml_escape(x_label) + " (max " + fmt(xmax) + ")</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    std::string d;
    for (std::size_t k = 0; k < c.x.size(); ++k) d += (k == 0 ? "M" : " L") + fmt(px(c.x[k])) + " " + fmt(py(c.y[k]));
    s += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + palette(i) + "\" stroke-width=\"1.5\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(i + 1);
    s += "<text x=\"" + fmt(left + pw + 8) + "\" y=\"" + fmt(ly) + "\" font-size=\"11\" fill=\"" + palette(i) + "\">" +
         xml_escape(c.label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace dppo::lab
