#include "dppo/lab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dppo/lab/svg.hpp"

namespace dppo::lab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

json RunSummary::to_json() const {
  return {{"dir", dir.generic_string()},
          {"label", label},
          {"method", method},
          {"seed", seed},
          {"config_hash", config_hash},
          {"pretrained_success", pretrained_success},
          {"final_success", final_success},
          {"iterations", iterations},
          {"env_steps", env_steps},
          {"reached_target", reached_target}};
}

RunSummary read_run(const fs::path& dir) {
  std::ifstream in(dir / "run.json");
  if (!in) throw std::runtime_error("report: no run.json in '" + dir.string() + "'");
  RunSummary r;
  try {
    const json j = json::parse(in);
    r.dir = dir;
    r.label = j.at("label").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.pretrained_success = j.at("pretrained_success").get<double>();
    r.final_success = j.at("final_success").get<double>();
    r.iterations = j.at("iterations").get<int>();
    r.env_steps = j.at("env_steps").get<std::uint64_t>();
    r.reached_target = j.at("reached_target").get<bool>();
  } catch (const json::exception& e) {
    throw std::runtime_error("report: malformed run.json in '" + dir.string() + "': " + e.what());
  }
  std::ifstream csv(dir / "train.csv");
  if (!csv) throw std::runtime_error("report: no train.csv in '" + dir.string() + "'");
  std::string line;
  int it_col = -1, ev_col = -1;
  while (std::getline(csv, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (it_col < 0) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == "iteration") it_col = static_cast<int>(i);
        if (cells[i] == "eval_success") ev_col = static_cast<int>(i);
      }
      if (it_col < 0 || ev_col < 0) throw std::runtime_error("report: train.csv lacks iteration/eval_success");
      continue;
    }
    if (static_cast<int>(cells.size()) <= ev_col || cells[ev_col].empty()) continue;
    r.curve.emplace_back(std::stoi(cells[it_col]), std::stod(cells[ev_col]));
  }
  return r;
}

std::vector<fs::path> discover_runs(const fs::path& root) {
  std::vector<fs::path> out;
  if (fs::exists(root / "run.json")) out.push_back(root);
  if (fs::is_directory(root)) {
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_directory() && fs::exists(e.path() / "run.json")) out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

ExperimentReport build_report(const std::vector<fs::path>& run_dirs) {
  ExperimentReport rep;
  std::map<std::string, std::size_t> index;
  for (const auto& d : run_dirs) {
    RunSummary r = read_run(d);
    auto [it, fresh] = index.emplace(r.label, rep.groups.size());
    if (fresh) {
      rep.groups.emplace_back();
      rep.groups.back().label = r.label;
      rep.groups.back().method = r.method;
    }
    rep.groups[it->second].runs.push_back(std::move(r));
  }
  for (auto& g : rep.groups) {
    const double n = static_cast<double>(g.runs.size());
    for (const auto& r : g.runs) {
      g.pretrained_mean += r.pretrained_success / n;
      g.final_mean += r.final_success / n;
    }
    if (g.runs.size() > 1) {
      double ss = 0.0;
      for (const auto& r : g.runs) ss += (r.final_success - g.final_mean) * (r.final_success - g.final_mean);
      g.final_std = std::sqrt(ss / (n - 1.0));
    }
    std::set<int> iters;
    for (const auto& r : g.runs)
      for (const auto& [i, v] : r.curve) iters.insert(i);
    for (int i : iters) {
      double sum = 0.0;
      std::size_t k = 0;
      for (const auto& r : g.runs) {
        const double* last = nullptr;
        for (const auto& p : r.curve)
          if (p.first <= i) last = &p.second;
        if (last) {
          sum += *last;
          ++k;
        }
      }
      if (k == g.runs.size()) g.curve.emplace_back(i, sum / static_cast<double>(k));
    }
  }
  return rep;
}

json ExperimentReport::to_json() const {
  json groups_j = json::array();
  for (const auto& g : groups) {
    json runs_j = json::array();
    json hashes = json::array();
    for (const auto& r : g.runs) {
      runs_j.push_back(r.to_json());
      hashes.push_back(r.config_hash);
    }
    json curve = json::array();
    for (const auto& [i, v] : g.curve) curve.push_back({{"iteration", i}, {"eval_success", v}});
    groups_j.push_back({{"label", g.label},
                        {"method", g.method},
                        {"n_runs", g.runs.size()},
                        {"pretrained_success_mean", g.pretrained_mean},
                        {"final_success_mean", g.final_mean},
                        {"final_success_std", g.final_std},
                        {"config_hashes", hashes},
                        {"curve", curve},
                        {"runs", runs_j}});
  }
  return {{"version", 1}, {"groups", groups_j}};
}

void write_report(const fs::path& out_dir, const ExperimentReport& report) {
  fs::create_directories(out_dir);
  {
    std::ofstream j(out_dir / "report.json");
    j << report.to_json().dump(2) << "\n";
  }
  {
    std::ofstream c(out_dir / "report.csv");
    c << "# dppo-report v1\n";
    c << "label,method,n_runs,pretrained_success_mean,final_success_mean,final_success_std\n";
    for (const auto& g : report.groups) {
      c << g.label << "," << g.method << "," << g.runs.size() << "," << num(g.pretrained_mean) << ","
        << num(g.final_mean) << "," << num(g.final_std) << "\n";
    }
  }
  std::vector<Curve> curves;
  for (const auto& g : report.groups) {
    Curve c{g.label, {}, {}};
    for (const auto& [i, v] : g.curve) {
      c.x.push_back(i);
      c.y.push_back(v);
    }
    curves.push_back(std::move(c));
  }
  std::ofstream s(out_dir / "curves.svg");
  s << curves_svg(curves, "iteration");
}

}  // namespace dppo::lab
