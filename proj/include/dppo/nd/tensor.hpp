#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dppo::nd {

// Raised whenever a NaN or infinity shows up where finite values are required.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major float64 array with an optional gradient buffer of the same
// shape. Rank-2 tensors are the working currency of the autodiff ops.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor(Shape{rows, cols}, fill);
  }
  static Tensor scalar(double value) { return Tensor(Shape{1, 1}, std::vector<double>{value}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  // Rank-2 accessors. A rank-1 tensor reads as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols(), cols()); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }

  bool has_grad() const { return grad_.has_value(); }
  // Allocates a zeroed gradient buffer on first use.
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();
  void drop_grad() { grad_.reset(); }

  bool all_finite() const;
  // Throws NonFiniteError naming `what` if any element is NaN/Inf.
  void require_finite(const std::string& what) const;

  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  std::vector<double> data_;
  std::optional<std::vector<double>> grad_;
};

bool all_finite(std::span<const double> values);

// Rows `index` of a rank-2 tensor, in the given order.
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> index);

}  // namespace dppo::nd
