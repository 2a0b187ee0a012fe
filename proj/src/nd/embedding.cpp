#include "dppo/nd/embedding.hpp"

#include <cmath>

namespace dppo::nd {

TimeEmbedding::TimeEmbedding(std::size_t dim) : dim_(dim) {
  if (dim < 4 || dim % 2 != 0) throw std::invalid_argument("TimeEmbedding: dim must be even and >= 4");
}

void TimeEmbedding::embed_into(double k, std::span<double> out) const {
  if (out.size() != dim_) throw ShapeError("TimeEmbedding: output width mismatch");
  const std::size_t half = dim_ / 2;
  const double scale = std::log(10000.0) / static_cast<double>(half - 1);
  for (std::size_t i = 0; i < half; ++i) {
    const double arg = k * std::exp(-scale * static_cast<double>(i));
    out[i] = std::sin(arg);
    out[half + i] = std::cos(arg);
  }
}

Tensor TimeEmbedding::embed(std::span<const int> ks) const {
  Tensor out = Tensor::matrix(ks.size(), dim_);
  for (std::size_t r = 0; r < ks.size(); ++r) embed_into(static_cast<double>(ks[r]), out.row(r));
  return out;
}

}  // namespace dppo::nd
