#include "sparselab/model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sparselab/error.hpp"
#include "sparselab/ops.hpp"

namespace sparselab {

double GradientVector::squared_norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return s;
}

namespace {

Tensor block_tensor(std::span<const double> flat, const ParamBlock& b, const Shape& shape) {
  if (flat.empty()) return {};
  return Tensor(shape, std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                           flat.begin() + static_cast<std::ptrdiff_t>(b.offset + b.size)));
}

Tensor shaped_batch(const MaskedNetwork& net, const Tensor& batch) {
  if (batch.rank() < 1) throw ShapeError("input batch has no batch dimension");
  const std::size_t n = batch.dim(0);
  Shape want{n};
  want.insert(want.end(), net.spec().input.begin(), net.spec().input.end());
  if (batch.shape() == want) return batch;
  if (batch.size() != shape_size(want)) {
    throw ShapeError(fmt::format("input batch {} does not match network input {}", shape_string(batch.shape()),
                                 shape_string(net.spec().input)));
  }
  return batch.reshaped(std::move(want));
}

}  // namespace

ForwardPass forward(const MaskedNetwork& net, const Tensor& batch, std::span<const int> labels,
                    const ForwardOptions& options) {
  const ParamLayout& layout = net.layout();
  if (!options.tangent.empty() && options.tangent.size() != layout.total) {
    throw ShapeError(fmt::format("tangent has {} entries, network has {} parameters", options.tangent.size(),
                                 layout.total));
  }
  if (!batch.all_finite()) throw NumericError("non-finite value in input batch");

  ForwardPass pass{.tape = Tape(!options.tangent.empty())};
  pass.total = layout.total;
  pass.active.assign(layout.total, 1);
  Tape& tape = pass.tape;
  SlotId cur = tape.constant(shaped_batch(net, batch));

  std::size_t block = 0;
  const auto layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    try {
      SlotId w = 0, b = 0;
      if (l.weighted()) {
        const ParamBlock& wb = layout.blocks.at(block++);
        w = tape.leaf(l.weight, block_tensor(options.tangent, wb, l.weight.shape()));
        pass.params.push_back({wb, w});
        for (std::size_t k = 0; k < wb.size; ++k) pass.active[wb.offset + k] = l.mask.active(k) ? 1 : 0;
        if (l.spec.bias) {
          const ParamBlock& bb = layout.blocks.at(block++);
          b = tape.leaf(l.bias, block_tensor(options.tangent, bb, l.bias.shape()));
          pass.params.push_back({bb, b});
        }
      }
      switch (l.spec.kind) {
        case LayerKind::Linear: {
          std::vector<SlotId> in{cur, w};
          if (l.spec.bias) in.push_back(b);
          cur = tape.apply<MaskedLinearOp>(std::move(in), l.mask.as_tensor(), l.spec.bias);
          break;
        }
        case LayerKind::Conv2d: {
          std::vector<SlotId> in{cur, w};
          if (l.spec.bias) in.push_back(b);
          cur = tape.apply<MaskedConv2dOp>(std::move(in), l.mask.as_tensor(), l.spec.padding, l.spec.bias);
          break;
        }
        case LayerKind::MaxPool2: cur = tape.apply<MaxPool2Op>({cur}); break;
        case LayerKind::Flatten: cur = tape.apply<FlattenOp>({cur}); break;
      }
      if (l.weighted()) pass.preactivations.push_back(cur);
      switch (l.spec.activation) {
        case Activation::None: break;
        case Activation::Relu: cur = tape.apply<ReluOp>({cur}); break;
        case Activation::Tanh: cur = tape.apply<TanhOp>({cur}); break;
      }
    } catch (const ShapeError& e) {
      throw ShapeError(fmt::format("layer {} ({}): {}", i, to_string(l.spec.kind), e.what()));
    }
  }
  pass.logits = cur;
  if (!labels.empty()) {
    cur = tape.apply<SoftmaxCrossEntropyOp>({cur}, std::vector<int>(labels.begin(), labels.end()));
    if (options.loss_scale != 1.0) cur = tape.apply<ScaleOp>({cur}, options.loss_scale);
    pass.loss_slot = cur;
    pass.has_loss = true;
    pass.loss = tape.value(cur)[0];
  }
  return pass;
}

GradientVector backward(ForwardPass& pass, GradientMode mode) {
  if (!pass.has_loss) throw Error("backward needs a forward pass with labels");
  if (pass.tape.consumed()) throw Error("tape already consumed by a previous backward pass");
  pass.tape.backward(pass.loss_slot);
  GradientVector g{std::vector<double>(pass.total, 0.0)};
  for (const auto& p : pass.params) {
    const Tensor* adj = pass.tape.adjoint(p.slot);
    if (!adj) continue;
    std::copy(adj->data().begin(), adj->data().end(), g.values.begin() + static_cast<std::ptrdiff_t>(p.block.offset));
  }
  if (mode == GradientMode::Masked) {
    for (std::size_t i = 0; i < pass.total; ++i)
      if (!pass.active[i]) g.values[i] = 0.0;
  }
  return g;
}

std::vector<double> hvp_full(const MaskedNetwork& net, const Tensor& batch, std::span<const int> labels,
                             std::span<const double> v, double loss_scale) {
  if (v.size() != net.layout().total) {
    throw ShapeError(fmt::format("hvp direction has {} entries, network has {}", v.size(), net.layout().total));
  }
  if (labels.empty()) throw ShapeError("hvp needs labels");
  ForwardPass pass = forward(net, batch, labels, {.tangent = v, .loss_scale = loss_scale});
  pass.tape.backward(pass.loss_slot);
  std::vector<double> out(pass.total, 0.0);
  for (const auto& p : pass.params) {
    const Tensor* r = pass.tape.adjoint_tangent(p.slot);
    if (!r) continue;
    std::copy(r->data().begin(), r->data().end(), out.begin() + static_cast<std::ptrdiff_t>(p.block.offset));
  }
  for (std::size_t i = 0; i < pass.total; ++i)
    if (!pass.active[i]) out[i] = 0.0;
  return out;
}

std::vector<double> hvp(const MaskedNetwork& net, const Tensor& batch, std::span<const int> labels,
                        std::span<const double> v_active) {
  const std::vector<std::size_t> coords = net.active_coordinates();
  if (v_active.size() != coords.size()) {
    throw ShapeError(fmt::format("hvp direction has {} entries, network has {} active coordinates", v_active.size(),
                                 coords.size()));
  }
  std::vector<double> full(net.layout().total, 0.0);
  for (std::size_t i = 0; i < coords.size(); ++i) full[coords[i]] = v_active[i];
  const std::vector<double> hv = hvp_full(net, batch, labels, full);
  std::vector<double> out(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) out[i] = hv[coords[i]];
  return out;
}

std::pair<double, GradientVector> loss_and_gradient(const MaskedNetwork& net, const Tensor& batch,
                                                    std::span<const int> labels, GradientMode mode) {
  ForwardPass pass = forward(net, batch, labels);
  GradientVector g = backward(pass, mode);
  return {pass.loss, std::move(g)};
}

Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end) {
  if (t.rank() < 1 || begin > end || end > t.dim(0)) throw ShapeError("row slice out of range");
  const std::size_t stride = t.dim(0) == 0 ? 0 : t.size() / t.dim(0);
  Shape s = t.shape();
  s[0] = end - begin;
  return Tensor(s, std::vector<double>(t.storage().begin() + static_cast<std::ptrdiff_t>(begin * stride),
                                       t.storage().begin() + static_cast<std::ptrdiff_t>(end * stride)));
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows) {
  if (t.rank() < 1) throw ShapeError("gather needs a batch dimension");
  const std::size_t stride = t.dim(0) == 0 ? 0 : t.size() / t.dim(0);
  Shape s = t.shape();
  s[0] = rows.size();
  Tensor out(s);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= t.dim(0)) throw ShapeError("gather row out of range");
    std::copy_n(t.raw() + rows[r] * stride, stride, out.raw() + r * stride);
  }
  return out;
}

EvalResult evaluate(const MaskedNetwork& net, const Tensor& inputs, std::span<const int> labels,
                    bool keep_probabilities, std::size_t chunk) {
  const std::size_t n = inputs.dim(0);
  if (labels.size() != n) throw ShapeError(fmt::format("{} labels for {} inputs", labels.size(), n));
  if (n == 0) throw ShapeError("evaluate on an empty dataset");
  chunk = std::max<std::size_t>(chunk, 1);
  EvalResult r;
  r.predictions.resize(n);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    const Tensor xb = slice_rows(inputs, begin, end);
    ForwardPass pass = forward(net, xb, labels.subspan(begin, end - begin));
    loss_sum += pass.loss * static_cast<double>(end - begin);
    const Tensor& z = pass.logits_value();
    const std::size_t classes = z.dim(1);
    if (keep_probabilities && r.probabilities.size() == 0) {
      r.probabilities.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(classes));
    }
    for (std::size_t b = 0; b < end - begin; ++b) {
      const double* row = z.raw() + b * classes;
      const auto best = static_cast<int>(std::max_element(row, row + classes) - row);
      r.predictions[begin + b] = best;
      if (best == labels[begin + b]) ++correct;
      if (keep_probabilities) {
        const double m = row[best];
        double s = 0.0;
        for (std::size_t c = 0; c < classes; ++c) s += std::exp(row[c] - m);
        for (std::size_t c = 0; c < classes; ++c) {
          r.probabilities(static_cast<Eigen::Index>(begin + b), static_cast<Eigen::Index>(c)) = std::exp(row[c] - m) / s;
        }
      }
    }
  }
  r.loss = loss_sum / static_cast<double>(n);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return r;
}

}  // namespace sparselab
