#pragma once

#include <vector>

#include "sparselab/tape.hpp"
#include "sparselab/tensor.hpp"

namespace sparselab {

enum class Padding : unsigned char { Valid, Same };

/// z = x (W*M)^T + b. Inputs: x [B, n_in], W [n_out, n_in], optional b [n_out].
///
/// The weight adjoint is d(loss)/d(W*M), i.e. the gradient as if every
/// connection were present. Callers mask it before exposing it.
class MaskedLinearOp final : public Op {
 public:
  MaskedLinearOp(Tensor mask, bool has_bias) : mask_(std::move(mask)), has_bias_(has_bias) {}
  std::string_view name() const override { return "masked_linear"; }
  void forward(Tape& tape) override;
  void backward(Tape& tape) override;

 private:
  Tensor mask_;
  bool has_bias_;
  Tensor w_eff_;
  Tensor w_eff_tangent_;
};

/// Stride-1 2D convolution with a per-kernel-element mask.
/// Inputs: x [B, C, H, W], W [O, C, k, k], optional b [O].
class MaskedConv2dOp final : public Op {
 public:
  MaskedConv2dOp(Tensor mask, Padding padding, bool has_bias)
      : mask_(std::move(mask)), padding_(padding), has_bias_(has_bias) {}
  std::string_view name() const override { return "masked_conv2d"; }
  void forward(Tape& tape) override;
  void backward(Tape& tape) override;

 private:
  struct Geometry {
    std::size_t batch, channels, height, width, out_channels, kernel, pad, out_height, out_width;
    std::size_t rows() const { return batch * out_height * out_width; }
    std::size_t cols() const { return channels * kernel * kernel; }
  };
  MatrixRM im2col(const Tensor& x) const;
  void col2im(const MatrixRM& cols, Tensor& dx) const;
  MatrixRM to_rows(const Tensor& nchw) const;
  Tensor from_rows(const MatrixRM& rows) const;

  Tensor mask_;
  Padding padding_;
  bool has_bias_;
  Geometry g_{};
  MatrixRM cols_;
  MatrixRM cols_tangent_;
  Tensor w_eff_;
  Tensor w_eff_tangent_;
};

/// 2x2 max pooling with stride 2 (trailing odd rows/columns are dropped).
/// Ties pick the first element in row-major scan order.
class MaxPool2Op final : public Op {
 public:
  std::string_view name() const override { return "max_pool2"; }
  void forward(Tape& tape) override;
  void backward(Tape& tape) override;

 private:
  std::vector<std::size_t> argmax_;
};

class ReluOp final : public Op {
 public:
  std::string_view name() const override { return "relu"; }
  void forward(Tape& tape) override;
  void backward(Tape& tape) override;
};

class TanhOp final : public Op {
 public:
  std::string_view name() const override { return "tanh"; }
  void forward(Tape& tape) override;
  void backward(Tape& tape) override;
};

/// Reshapes [B, ...] to [B, prod(...)].
class FlattenOp final : public Op {
 public:
  std::string_view name() const override { return "flatten"; }
  void forward(Tape& tape) override;
  void backward(Tape& tape) override;
};

/// Mean softmax cross-entropy over the batch, computed through log-sum-exp.
class SoftmaxCrossEntropyOp final : public Op {
 public:
  explicit SoftmaxCrossEntropyOp(std::vector<int> labels) : labels_(std::move(labels)) {}
  std::string_view name() const override { return "softmax_cross_entropy"; }
  void forward(Tape& tape) override;
  void backward(Tape& tape) override;

  const MatrixRM& probabilities() const { return probs_; }

 private:
  std::vector<int> labels_;
  MatrixRM probs_;
  MatrixRM probs_tangent_;
  bool has_probs_tangent_ = false;
};

class ScaleOp final : public Op {
 public:
  explicit ScaleOp(double factor) : factor_(factor) {}
  std::string_view name() const override { return "scale"; }
  void forward(Tape& tape) override;
  void backward(Tape& tape) override;

 private:
  double factor_;
};

/// y = x - c for a constant c of the same size.
class SubtractConstantOp final : public Op {
 public:
  explicit SubtractConstantOp(Tensor c) : c_(std::move(c)) {}
  std::string_view name() const override { return "subtract_constant"; }
  void forward(Tape& tape) override;
  void backward(Tape& tape) override;

 private:
  Tensor c_;
};

/// y = 0.5 * ||x||^2
class HalfSquaredNormOp final : public Op {
 public:
  std::string_view name() const override { return "half_squared_norm"; }
  void forward(Tape& tape) override;
  void backward(Tape& tape) override;
};

/// y = 0.5 * x^T A x over the flattened input.
class QuadraticFormOp final : public Op {
 public:
  explicit QuadraticFormOp(MatrixRM a);
  std::string_view name() const override { return "quadratic_form"; }
  void forward(Tape& tape) override;
  void backward(Tape& tape) override;

 private:
  MatrixRM sym_;
};

}  // namespace sparselab
