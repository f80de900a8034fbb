#pragma once

#include <string>
#include <vector>

#include "sparselab/network.hpp"
#include "sparselab/rng.hpp"

namespace sparselab {

enum class InitFamily {
  MaskedDense,  // dense fan, mask ignored
  LayerScaled,  // mean active fan of the layer
  PerNeuron,    // active fan of each neuron
};

enum class FanDirection { Forward, Backward, Average };

struct InitScheme {
  InitFamily family = InitFamily::PerNeuron;
  double gain = 2.0;  // 1 = Glorot-style, 2 = He-style
  FanDirection direction = FanDirection::Forward;

  /// "masked-dense", "layer-scaled", "per-neuron", with "-backward"/"-average"
  /// and "-glorot" suffixes when not the defaults.
  std::string name() const;
  static InitScheme parse(const std::string& name);
  friend bool operator==(const InitScheme&, const InitScheme&) = default;
};

std::string to_string(InitFamily family);

struct InitReport {
  /// Neurons whose fan in the scheme's direction is zero; their weights stay 0.
  std::size_t zero_fan_neurons = 0;
};

/// Variance used for each weight of a weighted layer under the scheme (0 at
/// masked-out positions and where the fan is zero). Same shape as the weight.
std::vector<double> weight_variances(const Layer& layer, const InitScheme& scheme);

/// Samples every active weight from N(0, variance) and zeroes biases. Draws one
/// standard normal per active weight in flat order, so schemes that agree on
/// the variance produce identical weights from the same rng state.
InitReport initialize(MaskedNetwork& net, const InitScheme& scheme, Rng& rng);

}  // namespace sparselab
