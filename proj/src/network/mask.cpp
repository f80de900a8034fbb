#include "sparselab/mask.hpp"

#include <numeric>

#include <fmt/format.h>

#include "sparselab/error.hpp"

namespace sparselab {

Mask::Mask(Shape shape) : shape_(std::move(shape)), bits_(shape_size(shape_), 1) {}

Mask::Mask(Shape shape, std::vector<std::uint8_t> bits) : shape_(std::move(shape)), bits_(std::move(bits)) {
  if (shape_size(shape_) != bits_.size()) {
    throw ShapeError(fmt::format("mask shape {} needs {} bits, got {}", shape_string(shape_), shape_size(shape_),
                                 bits_.size()));
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::accumulate(bits_.begin(), bits_.end(), std::size_t{0}));
}

double Mask::density() const {
  return bits_.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(bits_.size());
}

Tensor Mask::as_tensor() const {
  Tensor t(shape_);
  for (std::size_t i = 0; i < bits_.size(); ++i) t[i] = bits_[i] ? 1.0 : 0.0;
  return t;
}

std::vector<std::size_t> Mask::active_indices() const {
  std::vector<std::size_t> out;
  out.reserve(count());
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i]) out.push_back(i);
  return out;
}

FanCounts fan_counts(const Mask& mask) {
  const Shape& s = mask.shape();
  if (s.size() != 2 && s.size() != 4) {
    throw ShapeError(fmt::format("fan counts need a rank-2 or rank-4 mask, got {}", shape_string(s)));
  }
  const std::size_t n_out = s[0], n_in = s[1];
  const std::size_t area = s.size() == 4 ? s[2] * s[3] : 1;
  FanCounts fc{std::vector<std::size_t>(n_out, 0), std::vector<std::size_t>(n_in, 0)};
  for (std::size_t i = 0; i < n_out; ++i)
    for (std::size_t j = 0; j < n_in; ++j)
      for (std::size_t a = 0; a < area; ++a)
        if (mask.active((i * n_in + j) * area + a)) {
          ++fc.fan_in[i];
          ++fc.fan_out[j];
        }
  return fc;
}

}  // namespace sparselab
