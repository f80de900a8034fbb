#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sparselab/mask.hpp"
#include "sparselab/ops.hpp"
#include "sparselab/tensor.hpp"

namespace sparselab {

enum class LayerKind : std::uint8_t { Linear, Conv2d, MaxPool2, Flatten };
enum class Activation : std::uint8_t { None, Relu, Tanh };

std::string to_string(LayerKind kind);
std::string to_string(Activation act);

struct LayerSpec {
  LayerKind kind = LayerKind::Linear;
  std::size_t out = 0;     // output features (linear) or output channels (conv)
  std::size_t kernel = 0;  // square kernel side (conv)
  Padding padding = Padding::Valid;
  Activation activation = Activation::None;
  bool bias = true;

  static LayerSpec linear(std::size_t out, Activation act, bool bias = true);
  static LayerSpec conv(std::size_t out_channels, std::size_t kernel, Padding padding, Activation act,
                        bool bias = true);
  static LayerSpec max_pool();
  static LayerSpec flatten();

  bool weighted() const { return kind == LayerKind::Linear || kind == LayerKind::Conv2d; }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Architecture description. `input` excludes the batch dimension.
struct NetworkSpec {
  std::string name;
  Shape input;
  std::vector<LayerSpec> layers;
  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// conv(6,5,same)-pool-conv(16,5,valid)-pool-fc120-fc84-fc10, ReLU, on 1x28x28.
NetworkSpec lenet5_spec();
/// Fully-connected net with the given widths (first entry is the input size).
NetworkSpec mlp_spec(const std::vector<std::size_t>& widths, Activation hidden = Activation::Relu,
                     bool bias = false);

struct Layer {
  LayerSpec spec;
  Shape in_shape;   // excludes batch
  Shape out_shape;  // excludes batch
  Tensor weight;    // [out, in] or [C_out, C_in, k, k]; empty when unweighted
  Tensor bias;      // [out]; empty without bias
  Mask mask;

  bool weighted() const { return spec.weighted(); }
  std::size_t fan_in_dense() const;   // n_in (or C_in * k * k)
  std::size_t fan_out_dense() const;  // n_out (or C_out * k * k)
};

/// One contiguous block of the flat parameter vector.
struct ParamBlock {
  std::size_t layer;
  bool is_bias;
  std::size_t offset;
  std::size_t size;
};

/// Flat parameter ordering: for each weighted layer, its weights then its bias.
struct ParamLayout {
  std::vector<ParamBlock> blocks;
  std::size_t total = 0;
};

/// Sequence of masked layers. Exposed weights are kept zero wherever the mask
/// is zero; every mutating member re-establishes that.
class MaskedNetwork {
 public:
  MaskedNetwork() = default;

  /// Builds a network with dense masks and zero parameters.
  static MaskedNetwork build(const NetworkSpec& spec);

  const NetworkSpec& spec() const { return spec_; }
  std::span<Layer> layers() { return layers_; }
  std::span<const Layer> layers() const { return layers_; }
  Layer& layer(std::size_t i) { return layers_.at(i); }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  std::vector<std::size_t> weighted_layers() const;

  std::size_t weight_count() const;
  std::size_t bias_count() const;
  std::size_t parameter_count() const { return weight_count() + bias_count(); }
  std::size_t active_weight_count() const;
  /// Fraction of masked-out weights over all weighted layers (biases excluded).
  double global_sparsity() const;
  std::vector<double> layer_densities() const;

  void set_mask(std::size_t layer, Mask mask);
  /// Zeroes every weight whose mask bit is 0.
  void apply_masks();

  const ParamLayout& layout() const { return layout_; }
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  /// Flat indices of active weights and all biases, in layout order.
  std::vector<std::size_t> active_coordinates() const;
  /// 1.0 at active coordinates, 0.0 at masked-out weights.
  std::vector<double> flat_mask() const;

  std::uint64_t step = 0;

  friend bool operator==(const MaskedNetwork&, const MaskedNetwork&);

 private:
  void rebuild_layout();

  NetworkSpec spec_;
  std::vector<Layer> layers_;
  ParamLayout layout_;
};

bool same_architecture(const MaskedNetwork& a, const MaskedNetwork& b);
bool same_masks(const MaskedNetwork& a, const MaskedNetwork& b);

}  // namespace sparselab
