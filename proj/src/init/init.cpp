#include "sparselab/init.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "sparselab/error.hpp"

namespace sparselab {

std::string to_string(InitFamily family) {
  switch (family) {
    case InitFamily::MaskedDense: return "masked-dense";
    case InitFamily::LayerScaled: return "layer-scaled";
    case InitFamily::PerNeuron: return "per-neuron";
  }
  return "unknown";
}

std::string InitScheme::name() const {
  std::string s = to_string(family);
  if (direction == FanDirection::Backward) s += "-backward";
  if (direction == FanDirection::Average) s += "-average";
  if (gain == 1.0) s += "-glorot";
  else if (gain != 2.0) s += fmt::format("-gain{}", gain);
  return s;
}

InitScheme InitScheme::parse(const std::string& name) {
  InitScheme s;
  std::string rest = name;
  auto take = [&rest](const std::string& prefix) {
    if (rest.rfind(prefix, 0) != 0) return false;
    rest = rest.substr(prefix.size());
    return true;
  };
  if (take("masked-dense")) s.family = InitFamily::MaskedDense;
  else if (take("layer-scaled")) s.family = InitFamily::LayerScaled;
  else if (take("per-neuron")) s.family = InitFamily::PerNeuron;
  else throw ConfigError(fmt::format("unknown init scheme '{}'", name));
  if (take("-backward")) s.direction = FanDirection::Backward;
  else if (take("-average")) s.direction = FanDirection::Average;
  else take("-forward");
  if (take("-glorot")) s.gain = 1.0;
  else if (take("-he")) s.gain = 2.0;
  else if (take("-gain")) {
    try {
      std::size_t used = 0;
      s.gain = std::stod(rest, &used);
      rest = rest.substr(used);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("bad gain in init scheme '{}'", name));
    }
    if (!(s.gain > 0.0)) throw ConfigError(fmt::format("init gain must be positive in '{}'", name));
  }
  if (!rest.empty()) throw ConfigError(fmt::format("unknown init scheme '{}'", name));
  return s;
}

namespace {

// Output neuron (or channel) and input neuron (or channel) of a flat weight index.
struct Coord {
  std::size_t out, in;
};

Coord coord(const Shape& shape, std::size_t flat) {
  if (shape.size() == 4) {
    const std::size_t per_out = shape[1] * shape[2] * shape[3];
    const std::size_t kk = shape[2] * shape[3];
    return {flat / per_out, (flat % per_out) / kk};
  }
  return {flat / shape[1], flat % shape[1]};
}

}  // namespace

std::vector<double> weight_variances(const Layer& layer, const InitScheme& scheme) {
  const Shape& shape = layer.weight.shape();
  const std::size_t n = layer.weight.size();
  std::vector<double> var(n, 0.0);
  const std::size_t active = layer.mask.count();
  const std::size_t n_out = shape[0];
  const std::size_t n_in = shape[1];
  const double g = scheme.gain;

  switch (scheme.family) {
    case InitFamily::MaskedDense: {
      const double fin = static_cast<double>(layer.fan_in_dense());
      const double fout = static_cast<double>(layer.fan_out_dense());
      double fan = fin;
      if (scheme.direction == FanDirection::Backward) fan = fout;
      if (scheme.direction == FanDirection::Average) fan = (fin + fout) / 2.0;
      for (std::size_t i = 0; i < n; ++i)
        if (layer.mask.active(i)) var[i] = g / fan;
      return var;
    }
    case InitFamily::LayerScaled: {
      const double fin = static_cast<double>(active) / static_cast<double>(n_out);
      const double fout = static_cast<double>(active) / static_cast<double>(n_in);
      double fan = fin;
      if (scheme.direction == FanDirection::Backward) fan = fout;
      if (scheme.direction == FanDirection::Average) fan = (fin + fout) / 2.0;
      if (active == 0) return var;
      for (std::size_t i = 0; i < n; ++i)
        if (layer.mask.active(i)) var[i] = g / fan;
      return var;
    }
    case InitFamily::PerNeuron: {
      const FanCounts fc = fan_counts(layer.mask);
      for (std::size_t i = 0; i < n; ++i) {
        if (!layer.mask.active(i)) continue;
        const Coord c = coord(shape, i);
        const double fin = static_cast<double>(fc.fan_in[c.out]);
        const double fout = static_cast<double>(fc.fan_out[c.in]);
        double fan = fin;
        if (scheme.direction == FanDirection::Backward) fan = fout;
        if (scheme.direction == FanDirection::Average) fan = (fin + fout) / 2.0;
        // An active weight contributes to both fans, so fan >= 1 here.
        var[i] = g / fan;
      }
      return var;
    }
  }
  return var;
}

InitReport initialize(MaskedNetwork& net, const InitScheme& scheme, Rng& rng) {
  if (!(scheme.gain > 0.0)) throw ConfigError("init gain must be positive");
  InitReport report;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t li : net.weighted_layers()) {
    Layer& layer = net.layer(li);
    const std::vector<double> var = weight_variances(layer, scheme);
    for (std::size_t i = 0; i < layer.weight.size(); ++i) {
      if (!layer.mask.active(i)) {
        layer.weight[i] = 0.0;
        continue;
      }
      const double z = normal(rng);
      layer.weight[i] = std::sqrt(var[i]) * z;
    }
    layer.bias.fill(0.0);

    const FanCounts fc = fan_counts(layer.mask);
    const auto& fans = scheme.direction == FanDirection::Backward ? fc.fan_out : fc.fan_in;
    for (std::size_t f : fans)
      if (f == 0) ++report.zero_fan_neurons;
  }
  return report;
}

}  // namespace sparselab
