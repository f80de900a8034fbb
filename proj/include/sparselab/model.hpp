#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sparselab/network.hpp"
#include "sparselab/tape.hpp"

namespace sparselab {

/// Gradient over the full flat parameter layout (see ParamLayout).
struct GradientVector {
  std::vector<double> values;

  double squared_norm() const;
  std::size_t size() const { return values.size(); }
};

enum class GradientMode {
  Masked,  // entries at masked-out weights forced to zero
  Dense,   // d(loss)/d(w) as if every connection were present
};

struct ForwardOptions {
  /// Direction over the full flat layout; when non-empty the tape carries
  /// tangents and backward() also yields the Hessian-vector product.
  std::span<const double> tangent;
  /// Multiplies the loss (and hence gradients and curvature).
  double loss_scale = 1.0;
};

/// Result of a forward pass: the loss, the tape that produced it, and the slots
/// of each weighted layer's pre-activation output.
struct ForwardPass {
  double loss = 0.0;
  Tape tape;
  SlotId logits = 0;
  SlotId loss_slot = 0;
  bool has_loss = false;
  std::vector<SlotId> preactivations;

  struct Binding {
    ParamBlock block;
    SlotId slot;
  };
  std::vector<Binding> params;
  std::vector<std::uint8_t> active;  // per flat coordinate
  std::size_t total = 0;

  const Tensor& logits_value() const { return tape.value(logits); }
};

/// Runs the network on `batch` ([B, ...input] or [B, prod(input)]). With labels,
/// appends mean softmax cross-entropy. Throws ShapeError naming the failing
/// layer, NumericError on non-finite input.
ForwardPass forward(const MaskedNetwork& net, const Tensor& batch, std::span<const int> labels,
                    const ForwardOptions& options = {});

/// Reverse pass over a forward tape. Throws if the tape was already consumed.
GradientVector backward(ForwardPass& pass, GradientMode mode = GradientMode::Masked);

/// H(theta) v over the full layout; masked coordinates of v are ignored and of
/// the result are zero.
std::vector<double> hvp_full(const MaskedNetwork& net, const Tensor& batch, std::span<const int> labels,
                             std::span<const double> v, double loss_scale = 1.0);

/// H(theta) v restricted to active coordinates (MaskedNetwork::active_coordinates).
std::vector<double> hvp(const MaskedNetwork& net, const Tensor& batch, std::span<const int> labels,
                        std::span<const double> v_active);

/// Loss and masked gradient in one call.
std::pair<double, GradientVector> loss_and_gradient(const MaskedNetwork& net, const Tensor& batch,
                                                    std::span<const int> labels,
                                                    GradientMode mode = GradientMode::Masked);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predictions;
  MatrixRM probabilities;  // filled when requested
};

/// Mean loss / accuracy over a dataset, processed in chunks.
EvalResult evaluate(const MaskedNetwork& net, const Tensor& inputs, std::span<const int> labels,
                    bool keep_probabilities = false, std::size_t chunk = 1000);

/// Rows [begin, end) of a [N, ...] tensor.
Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end);
/// Selected rows of a [N, ...] tensor.
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows);

}  // namespace sparselab
