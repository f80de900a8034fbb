#pragma once

#include <cstdint>
#include <vector>

#include "sparselab/tensor.hpp"

namespace sparselab {

/// Binary connectivity pattern with the same shape as its weight tensor.
class Mask {
 public:
  Mask() = default;
  /// All-ones (dense) mask.
  explicit Mask(Shape shape);
  Mask(Shape shape, std::vector<std::uint8_t> bits);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return bits_.size(); }
  bool active(std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool on) { bits_[i] = on ? 1 : 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  std::size_t count() const;
  double density() const;
  /// Mask as a tensor of 0.0 / 1.0 values.
  Tensor as_tensor() const;
  std::vector<std::size_t> active_indices() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  Shape shape_;
  std::vector<std::uint8_t> bits_;
};

struct FanCounts {
  std::vector<std::size_t> fan_in;   // per output neuron / output channel
  std::vector<std::size_t> fan_out;  // per input neuron / input channel
};

/// Incoming and outgoing active-connection counts. For a rank-2 mask
/// [n_out, n_in] these are row and column sums; for a rank-4 kernel mask
/// [C_out, C_in, k, k] they are summed over kernel elements per channel.
FanCounts fan_counts(const Mask& mask);

}  // namespace sparselab
