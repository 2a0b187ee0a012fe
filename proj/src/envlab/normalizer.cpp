#include "dppo/envlab/normalizer.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace dppo::envlab {

namespace {

void widen(std::vector<double>& lo, std::vector<double>& hi) {
  if (lo.size() != hi.size()) throw std::invalid_argument("Normalizer: min/max length mismatch");
  for (std::size_t d = 0; d < lo.size(); ++d) {
    if (!(hi[d] >= lo[d])) throw std::invalid_argument("Normalizer: max below min");
    if (hi[d] - lo[d] < 1e-6) {
      const double c = 0.5 * (lo[d] + hi[d]);
      lo[d] = c - 0.5;
      hi[d] = c + 0.5;
    }
  }
}

void apply(std::span<double> x, const std::vector<double>& lo, const std::vector<double>& hi, bool forward) {
  const std::size_t dim = lo.size();
  if (dim == 0 || x.size() % dim != 0) throw std::invalid_argument("Normalizer: width mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t d = i % dim;
    const double range = hi[d] - lo[d];
    x[i] = forward ? 2.0 * (x[i] - lo[d]) / range - 1.0 : lo[d] + 0.5 * (x[i] + 1.0) * range;
  }
}

void minmax(std::span<const double> data, std::size_t dim, std::vector<double>& lo, std::vector<double>& hi) {
  if (dim == 0 || data.empty() || data.size() % dim != 0) throw std::invalid_argument("Normalizer::fit: bad data");
  lo.assign(dim, std::numeric_limits<double>::infinity());
  hi.assign(dim, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < data.size(); ++i) {
    lo[i % dim] = std::min(lo[i % dim], data[i]);
    hi[i % dim] = std::max(hi[i % dim], data[i]);
  }
}

}  // namespace

Normalizer::Normalizer(std::vector<double> obs_min, std::vector<double> obs_max, std::vector<double> act_min,
                       std::vector<double> act_max)
    : obs_min_(std::move(obs_min)), obs_max_(std::move(obs_max)), act_min_(std::move(act_min)),
      act_max_(std::move(act_max)) {
  widen(obs_min_, obs_max_);
  widen(act_min_, act_max_);
}

Normalizer Normalizer::fit(std::span<const double> obs, std::size_t obs_dim, std::span<const double> act,
                           std::size_t act_dim) {
  std::vector<double> olo, ohi, alo, ahi;
  minmax(obs, obs_dim, olo, ohi);
  minmax(act, act_dim, alo, ahi);
  return Normalizer(olo, ohi, alo, ahi);
}

void Normalizer::normalize_obs(std::span<double> x) const { apply(x, obs_min_, obs_max_, true); }
void Normalizer::denormalize_obs(std::span<double> x) const { apply(x, obs_min_, obs_max_, false); }
void Normalizer::normalize_act(std::span<double> x) const { apply(x, act_min_, act_max_, true); }
void Normalizer::denormalize_act(std::span<double> x) const { apply(x, act_min_, act_max_, false); }

nlohmann::json Normalizer::to_json() const {
  return {{"obs_min", obs_min_}, {"obs_max", obs_max_}, {"act_min", act_min_}, {"act_max", act_max_}};
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
  return Normalizer(j.at("obs_min").get<std::vector<double>>(), j.at("obs_max").get<std::vector<double>>(),
                    j.at("act_min").get<std::vector<double>>(), j.at("act_max").get<std::vector<double>>());
}

}  // namespace dppo::envlab
