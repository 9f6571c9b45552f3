#include "fkmad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fkmad/errors.hpp"

namespace fkmad {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape_) + " does not hold " +
                     std::to_string(data_.size()) + " values");
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape_));
  }
  return shape_[axis];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("tensor: item() on non-scalar " + shape_str(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("tensor: cannot reshape " + shape_str(shape_) + " to " +
                     shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ShapeError("max_abs_diff: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace fkmad
