#include "sparselab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "sparselab/error.hpp"

namespace sparselab {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, ", ")); }

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError(fmt::format("tensor shape {} holds {} values, got {}", shape_string(shape_),
                                 shape_size(shape_), data_.size()));
  }
}

MatrixMap Tensor::matrix(std::size_t rows, std::size_t cols) {
  if (rows * cols != data_.size()) {
    throw ShapeError(fmt::format("cannot view {} as {}x{}", shape_string(shape_), rows, cols));
  }
  return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ConstMatrixMap Tensor::matrix(std::size_t rows, std::size_t cols) const {
  if (rows * cols != data_.size()) {
    throw ShapeError(fmt::format("cannot view {} as {}x{}", shape_string(shape_), rows, cols));
  }
  return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void Tensor::reshape(Shape shape) {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError(fmt::format("cannot reshape {} to {}", shape_string(shape_), shape_string(shape)));
  }
  shape_ = std::move(shape);
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out = *this;
  out.reshape(std::move(shape));
  return out;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace sparselab
