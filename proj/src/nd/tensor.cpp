#include "dppo/nd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dppo::nd {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
  }
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 2) return shape_[0];
  if (shape_.size() == 1) return 1;
  throw ShapeError("rows() on tensor of shape " + shape_string(shape_));
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  throw ShapeError("cols() on tensor of shape " + shape_string(shape_));
}

std::span<double> Tensor::grad() {
  if (!grad_) grad_.emplace(data_.size(), 0.0);
  return *grad_;
}

std::span<const double> Tensor::grad() const {
  if (!grad_) throw std::logic_error("tensor has no gradient buffer");
  return *grad_;
}

void Tensor::zero_grad() {
  if (grad_) {
    std::fill(grad_->begin(), grad_->end(), 0.0);
  } else {
    grad_.emplace(data_.size(), 0.0);
  }
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tensor::all_finite() const { return nd::all_finite(data_); }

void Tensor::require_finite(const std::string& what) const {
  if (!all_finite()) throw NonFiniteError("non-finite value in " + what);
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> index) {
  const std::size_t c = t.cols();
  Tensor out = Tensor::matrix(index.size(), c);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= t.rows()) throw ShapeError("gather_rows: row index out of range");
    std::copy(t.row(index[r]).begin(), t.row(index[r]).end(), out.row(r).begin());
  }
  return out;
}

}  // namespace dppo::nd
