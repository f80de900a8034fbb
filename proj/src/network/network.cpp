#include "sparselab/network.hpp"

#include <fmt/format.h>

#include "sparselab/error.hpp"

namespace sparselab {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Linear: return "linear";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::MaxPool2: return "maxpool2";
    case LayerKind::Flatten: return "flatten";
  }
  return "unknown";
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::None: return "none";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "unknown";
}

LayerSpec LayerSpec::linear(std::size_t out, Activation act, bool bias) {
  LayerSpec s;
  s.kind = LayerKind::Linear;
  s.out = out;
  s.activation = act;
  s.bias = bias;
  return s;
}

LayerSpec LayerSpec::conv(std::size_t out_channels, std::size_t kernel, Padding padding, Activation act, bool bias) {
  LayerSpec s;
  s.kind = LayerKind::Conv2d;
  s.out = out_channels;
  s.kernel = kernel;
  s.padding = padding;
  s.activation = act;
  s.bias = bias;
  return s;
}

LayerSpec LayerSpec::max_pool() {
  LayerSpec s;
  s.kind = LayerKind::MaxPool2;
  s.bias = false;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  s.bias = false;
  return s;
}

NetworkSpec lenet5_spec() {
  NetworkSpec spec;
  spec.name = "lenet5";
  spec.input = {1, 28, 28};
  spec.layers = {
      LayerSpec::conv(6, 5, Padding::Same, Activation::Relu),
      LayerSpec::max_pool(),
      LayerSpec::conv(16, 5, Padding::Valid, Activation::Relu),
      LayerSpec::max_pool(),
      LayerSpec::flatten(),
      LayerSpec::linear(120, Activation::Relu),
      LayerSpec::linear(84, Activation::Relu),
      LayerSpec::linear(10, Activation::None),
  };
  return spec;
}

NetworkSpec mlp_spec(const std::vector<std::size_t>& widths, Activation hidden, bool bias) {
  if (widths.size() < 2) throw ConfigError("an MLP needs an input width and at least one layer");
  NetworkSpec spec;
  spec.name = "mlp";
  for (std::size_t i = 0; i < widths.size(); ++i) spec.name += (i ? "-" : "") + std::to_string(widths[i]);
  spec.input = {widths.front()};
  for (std::size_t i = 1; i < widths.size(); ++i) {
    const bool last = i + 1 == widths.size();
    spec.layers.push_back(LayerSpec::linear(widths[i], last ? Activation::None : hidden, bias));
  }
  return spec;
}

std::size_t Layer::fan_in_dense() const {
  if (weight.rank() == 4) return weight.dim(1) * weight.dim(2) * weight.dim(3);
  return weight.rank() == 2 ? weight.dim(1) : 0;
}

std::size_t Layer::fan_out_dense() const {
  if (weight.rank() == 4) return weight.dim(0) * weight.dim(2) * weight.dim(3);
  return weight.rank() == 2 ? weight.dim(0) : 0;
}

MaskedNetwork MaskedNetwork::build(const NetworkSpec& spec) {
  if (spec.layers.empty()) throw ConfigError(fmt::format("network spec '{}' has no layers", spec.name));
  if (spec.input.empty() || shape_size(spec.input) == 0) throw ShapeError("network input shape is empty");
  MaskedNetwork net;
  net.spec_ = spec;
  Shape cur = spec.input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& ls = spec.layers[i];
    const auto fail = [&](const std::string& why) {
      return ShapeError(fmt::format("layer {} ({}): {} (input {})", i, to_string(ls.kind), why, shape_string(cur)));
    };
    Layer layer;
    layer.spec = ls;
    layer.in_shape = cur;
    switch (ls.kind) {
      case LayerKind::Linear: {
        if (cur.size() != 1) throw fail("expects a flat input; insert a flatten layer");
        if (ls.out == 0) throw fail("zero output width");
        layer.weight = Tensor({ls.out, cur[0]});
        cur = {ls.out};
        break;
      }
      case LayerKind::Conv2d: {
        if (cur.size() != 3) throw fail("expects a [C, H, W] input");
        if (ls.out == 0 || ls.kernel == 0) throw fail("zero channels or kernel");
        if (ls.padding == Padding::Same && ls.kernel % 2 == 0) throw fail("same padding needs an odd kernel");
        const std::size_t pad = ls.padding == Padding::Same ? (ls.kernel - 1) / 2 : 0;
        if (cur[1] + 2 * pad < ls.kernel || cur[2] + 2 * pad < ls.kernel) throw fail("kernel larger than input");
        layer.weight = Tensor({ls.out, cur[0], ls.kernel, ls.kernel});
        cur = {ls.out, cur[1] + 2 * pad - ls.kernel + 1, cur[2] + 2 * pad - ls.kernel + 1};
        break;
      }
      case LayerKind::MaxPool2: {
        if (cur.size() != 3) throw fail("expects a [C, H, W] input");
        if (cur[1] < 2 || cur[2] < 2) throw fail("input smaller than 2x2");
        cur = {cur[0], cur[1] / 2, cur[2] / 2};
        break;
      }
      case LayerKind::Flatten: {
        cur = {shape_size(cur)};
        break;
      }
    }
    if (ls.weighted()) {
      layer.mask = Mask(layer.weight.shape());
      if (ls.bias) layer.bias = Tensor({ls.out});
    }
    layer.out_shape = cur;
    net.layers_.push_back(std::move(layer));
  }
  net.rebuild_layout();
  return net;
}

void MaskedNetwork::rebuild_layout() {
  layout_ = {};
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    if (!l.weighted()) continue;
    layout_.blocks.push_back({i, false, layout_.total, l.weight.size()});
    layout_.total += l.weight.size();
    if (!l.bias.empty()) {
      layout_.blocks.push_back({i, true, layout_.total, l.bias.size()});
      layout_.total += l.bias.size();
    }
  }
}

std::vector<std::size_t> MaskedNetwork::weighted_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i].weighted()) out.push_back(i);
  return out;
}

std::size_t MaskedNetwork::weight_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size();
  return n;
}

std::size_t MaskedNetwork::bias_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.bias.size();
  return n;
}

std::size_t MaskedNetwork::active_weight_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_)
    if (l.weighted()) n += l.mask.count();
  return n;
}

double MaskedNetwork::global_sparsity() const {
  const std::size_t total = weight_count();
  return total == 0 ? 0.0 : 1.0 - static_cast<double>(active_weight_count()) / static_cast<double>(total);
}

std::vector<double> MaskedNetwork::layer_densities() const {
  std::vector<double> d;
  for (const auto& l : layers_)
    if (l.weighted()) d.push_back(l.mask.density());
  return d;
}

void MaskedNetwork::set_mask(std::size_t layer_index, Mask mask) {
  Layer& l = layers_.at(layer_index);
  if (!l.weighted()) throw ShapeError(fmt::format("layer {} has no weights to mask", layer_index));
  if (mask.shape() != l.weight.shape()) {
    throw ShapeError(fmt::format("layer {}: mask {} does not match weight {}", layer_index, shape_string(mask.shape()),
                                 shape_string(l.weight.shape())));
  }
  l.mask = std::move(mask);
  for (std::size_t i = 0; i < l.weight.size(); ++i)
    if (!l.mask.active(i)) l.weight[i] = 0.0;
}

void MaskedNetwork::apply_masks() {
  for (auto& l : layers_) {
    if (!l.weighted()) continue;
    for (std::size_t i = 0; i < l.weight.size(); ++i)
      if (!l.mask.active(i)) l.weight[i] = 0.0;
  }
}

std::vector<double> MaskedNetwork::flatten() const {
  std::vector<double> flat(layout_.total);
  for (const auto& b : layout_.blocks) {
    const Tensor& t = b.is_bias ? layers_[b.layer].bias : layers_[b.layer].weight;
    std::copy(t.data().begin(), t.data().end(), flat.begin() + static_cast<std::ptrdiff_t>(b.offset));
  }
  return flat;
}

void MaskedNetwork::assign(std::span<const double> flat) {
  if (flat.size() != layout_.total) {
    throw ShapeError(fmt::format("parameter vector has {} entries, network has {}", flat.size(), layout_.total));
  }
  for (const auto& b : layout_.blocks) {
    Tensor& t = b.is_bias ? layers_[b.layer].bias : layers_[b.layer].weight;
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(b.offset), b.size, t.data().begin());
  }
  apply_masks();
}

std::vector<std::size_t> MaskedNetwork::active_coordinates() const {
  std::vector<std::size_t> out;
  for (const auto& b : layout_.blocks) {
    const Layer& l = layers_[b.layer];
    for (std::size_t i = 0; i < b.size; ++i)
      if (b.is_bias || l.mask.active(i)) out.push_back(b.offset + i);
  }
  return out;
}

std::vector<double> MaskedNetwork::flat_mask() const {
  std::vector<double> m(layout_.total, 1.0);
  for (const auto& b : layout_.blocks) {
    if (b.is_bias) continue;
    const Mask& mask = layers_[b.layer].mask;
    for (std::size_t i = 0; i < b.size; ++i) m[b.offset + i] = mask.active(i) ? 1.0 : 0.0;
  }
  return m;
}

bool operator==(const MaskedNetwork& a, const MaskedNetwork& b) {
  if (!(a.spec_ == b.spec_) || a.step != b.step || a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const Layer& x = a.layers_[i];
    const Layer& y = b.layers_[i];
    if (!(x.weight == y.weight) || !(x.bias == y.bias) || !(x.mask == y.mask)) return false;
  }
  return true;
}

bool same_architecture(const MaskedNetwork& a, const MaskedNetwork& b) { return a.spec() == b.spec(); }

bool same_masks(const MaskedNetwork& a, const MaskedNetwork& b) {
  if (!same_architecture(a, b)) return false;
  for (std::size_t i = 0; i < a.layers().size(); ++i)
    if (!(a.layer(i).mask == b.layer(i).mask)) return false;
  return true;
}

}  // namespace sparselab
