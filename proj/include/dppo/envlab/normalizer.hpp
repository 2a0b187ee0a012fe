#pragma once

#include <span>
#include <vector>

#include "json.hpp"

namespace dppo::envlab {

// Per-dimension min/max scaling of observations and actions onto [-1, 1].
// Dimensions whose range is below 1e-6 are widened to center +/- 0.5.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(std::vector<double> obs_min, std::vector<double> obs_max, std::vector<double> act_min,
             std::vector<double> act_max);

  // Fits to row-major data with the given widths.
  static Normalizer fit(std::span<const double> obs, std::size_t obs_dim, std::span<const double> act,
                        std::size_t act_dim);

  std::size_t obs_dim() const { return obs_min_.size(); }
  std::size_t act_dim() const { return act_min_.size(); }

  // In-place on rows of width obs_dim / act_dim (actions may be chunks of
  // several consecutive act_dim-wide steps).
  void normalize_obs(std::span<double> x) const;
  void denormalize_obs(std::span<double> x) const;
  void normalize_act(std::span<double> x) const;
  void denormalize_act(std::span<double> x) const;

  const std::vector<double>& obs_min() const { return obs_min_; }
  const std::vector<double>& obs_max() const { return obs_max_; }
  const std::vector<double>& act_min() const { return act_min_; }
  const std::vector<double>& act_max() const { return act_max_; }

  nlohmann::json to_json() const;
  static Normalizer from_json(const nlohmann::json& j);

 private:
  std::vector<double> obs_min_, obs_max_, act_min_, act_max_;
};

}  // namespace dppo::envlab
