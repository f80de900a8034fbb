#include "sparselab/tape.hpp"

#include <fmt/format.h>

#include "sparselab/error.hpp"

namespace sparselab {

SlotId Tape::constant(Tensor value) {
  Slot slot;
  slot.value = std::move(value);
  slots_.push_back(std::move(slot));
  return slots_.size() - 1;
}

SlotId Tape::leaf(Tensor value, Tensor tangent) {
  Slot slot;
  slot.requires_grad = true;
  if (with_tangents_ && !tangent.empty()) {
    if (tangent.size() != value.size()) {
      throw ShapeError(fmt::format("leaf tangent has {} values, leaf has {}", tangent.size(), value.size()));
    }
    tangent.reshape(value.shape());
    slot.tangent = std::move(tangent);
    slot.has_tangent = true;
  }
  slot.value = std::move(value);
  slots_.push_back(std::move(slot));
  return slots_.size() - 1;
}

SlotId Tape::record(std::unique_ptr<Op> op, std::vector<SlotId> inputs) {
  if (consumed_) throw Error("cannot record onto a tape whose backward pass already ran");
  bool grad = false;
  for (SlotId in : inputs) {
    if (in >= slots_.size()) throw Error(fmt::format("op {} reads unknown slot {}", op->name(), in));
    grad = grad || slots_[in].requires_grad;
  }
  Slot out;
  out.requires_grad = grad;
  slots_.push_back(std::move(out));
  op->inputs = std::move(inputs);
  op->output = slots_.size() - 1;
  op->forward(*this);
  ops_.push_back(std::move(op));
  return slots_.size() - 1;
}

const Tensor* Tape::tangent(SlotId id) const {
  const Slot& s = slots_.at(id);
  return s.has_tangent ? &s.tangent : nullptr;
}

Tensor& Tape::tangent_out(SlotId id) {
  Slot& s = slots_.at(id);
  if (!s.has_tangent) {
    s.tangent = Tensor(s.value.shape());
    s.has_tangent = true;
  }
  return s.tangent;
}

const Tensor* Tape::adjoint(SlotId id) const {
  const Slot& s = slots_.at(id);
  return s.has_adjoint ? &s.adjoint : nullptr;
}

const Tensor* Tape::adjoint_tangent(SlotId id) const {
  const Slot& s = slots_.at(id);
  return s.has_adjoint_tangent ? &s.adjoint_tangent : nullptr;
}

Tensor& Tape::adjoint_acc(SlotId id) {
  Slot& s = slots_.at(id);
  if (!s.has_adjoint) {
    s.adjoint = Tensor(s.value.shape());
    s.has_adjoint = true;
  }
  return s.adjoint;
}

Tensor& Tape::adjoint_tangent_acc(SlotId id) {
  Slot& s = slots_.at(id);
  if (!s.has_adjoint_tangent) {
    s.adjoint_tangent = Tensor(s.value.shape());
    s.has_adjoint_tangent = true;
  }
  return s.adjoint_tangent;
}

void Tape::backward(SlotId scalar_output) {
  if (consumed_) throw Error("tape already consumed by a previous backward pass");
  Slot& out = slots_.at(scalar_output);
  if (out.value.size() != 1) {
    throw ShapeError(fmt::format("backward needs a scalar output, got {}", shape_string(out.value.shape())));
  }
  consumed_ = true;
  adjoint_acc(scalar_output)[0] += 1.0;
  if (with_tangents_) adjoint_tangent_acc(scalar_output);
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    Op& op = **it;
    if (!slots_[op.output].requires_grad || !slots_[op.output].has_adjoint) continue;
    op.backward(*this);
  }
}

}  // namespace sparselab
