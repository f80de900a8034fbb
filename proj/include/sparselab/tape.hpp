#pragma once

#include <cstddef>
#include <memory>
#include <string_view>
#include <vector>

#include "sparselab/tensor.hpp"

namespace sparselab {

using SlotId = std::size_t;

class Tape;

/// A primitive recorded on a Tape. Each op reads its input slots and writes one
/// output slot.
///
/// When the tape carries tangents, forward() also propagates the directional
/// derivative of the output and backward() also propagates the directional
/// derivative of the adjoints (Pearlmutter's R-operator). The parameter-slot
/// adjoint tangents then hold the Hessian-vector product.
class Op {
 public:
  virtual ~Op() = default;
  virtual std::string_view name() const = 0;
  virtual void forward(Tape& tape) = 0;
  virtual void backward(Tape& tape) = 0;

  std::vector<SlotId> inputs;
  SlotId output = 0;
};

/// Ordered record of primitive operations over value slots.
///
/// Ops execute eagerly when applied, so recording order is a topological order.
/// backward() walks the ops in reverse and accumulates into adjoints; it may
/// run once per tape.
class Tape {
 public:
  explicit Tape(bool with_tangents = false) : with_tangents_(with_tangents) {}

  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool with_tangents() const { return with_tangents_; }

  /// Non-differentiable input (data, labels are held by ops).
  SlotId constant(Tensor value);
  /// Differentiable leaf. `tangent` is the direction used for Hessian-vector
  /// products and is ignored unless the tape carries tangents.
  SlotId leaf(Tensor value, Tensor tangent = {});

  template <class OpT, class... Args>
  SlotId apply(std::vector<SlotId> inputs, Args&&... args) {
    auto op = std::make_unique<OpT>(std::forward<Args>(args)...);
    return record(std::move(op), std::move(inputs));
  }

  const Tensor& value(SlotId id) const { return slots_.at(id).value; }
  Tensor& mutable_value(SlotId id) { return slots_.at(id).value; }
  bool requires_grad(SlotId id) const { return slots_.at(id).requires_grad; }

  /// Tangent of a slot, or nullptr when it is identically zero.
  const Tensor* tangent(SlotId id) const;
  /// Zero-initialised tangent storage for an op's output.
  Tensor& tangent_out(SlotId id);

  /// Adjoint of a slot, or nullptr when nothing has flowed into it.
  const Tensor* adjoint(SlotId id) const;
  const Tensor* adjoint_tangent(SlotId id) const;
  /// Accumulation targets (zero-initialised on first touch).
  Tensor& adjoint_acc(SlotId id);
  Tensor& adjoint_tangent_acc(SlotId id);

  /// Seeds d(output)/d(output) = 1 for a scalar slot and propagates backwards.
  void backward(SlotId scalar_output);
  bool consumed() const { return consumed_; }

  std::size_t op_count() const { return ops_.size(); }
  std::string_view op_name(std::size_t i) const { return ops_.at(i)->name(); }

 private:
  struct Slot {
    Tensor value;
    Tensor tangent;
    Tensor adjoint;
    Tensor adjoint_tangent;
    bool requires_grad = false;
    bool has_tangent = false;
    bool has_adjoint = false;
    bool has_adjoint_tangent = false;
  };

  SlotId record(std::unique_ptr<Op> op, std::vector<SlotId> inputs);

  bool with_tangents_ = false;
  bool consumed_ = false;
  std::vector<Slot> slots_;
  std::vector<std::unique_ptr<Op>> ops_;
};

}  // namespace sparselab
