#include "sparselab/landscape.hpp"

#include <cmath>

#include <fmt/format.h>
#include <zlib.h>

#include "sparselab/checkpoint.hpp"
#include "sparselab/error.hpp"

namespace sparselab {

std::uint32_t mask_fingerprint(const MaskedNetwork& net) {
  const std::string desc = describe_spec(net.spec());
  uLong c = crc32(0L, Z_NULL, 0);
  c = crc32(c, reinterpret_cast<const Bytef*>(desc.data()), static_cast<uInt>(desc.size()));
  for (std::size_t li : net.weighted_layers()) {
    const auto& bits = net.layer(li).mask.bits();
    c = crc32(c, bits.data(), static_cast<uInt>(bits.size()));
  }
  return static_cast<std::uint32_t>(c);
}

ParamPoint make_point(const MaskedNetwork& net, std::string label, std::uint64_t seed) {
  const std::vector<double> flat = net.flatten();
  ParamPoint p;
  for (std::size_t i : net.active_coordinates()) p.values.push_back(flat[i]);
  p.mask_fingerprint = mask_fingerprint(net);
  p.label = std::move(label);
  p.seed = seed;
  return p;
}

double l2_distance(const ParamPoint& a, const ParamPoint& b) {
  if (a.mask_fingerprint != b.mask_fingerprint || a.values.size() != b.values.size()) {
    throw ShapeError(fmt::format("points '{}' and '{}' do not share a mask", a.label, b.label));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
  return std::sqrt(s);
}

std::vector<double> alpha_grid(std::size_t n) {
  if (n < 2) throw ConfigError("interpolation grid needs at least the two endpoints");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

std::vector<InterpolationPoint> interpolate_loss(const MaskedNetwork& a, const MaskedNetwork& b,
                                                 std::span<const double> grid, const Tensor& inputs,
                                                 std::span<const int> labels) {
  if (grid.empty()) throw ConfigError("empty interpolation grid");
  if (!same_masks(a, b)) throw ShapeError("interpolation endpoints do not share a mask");
  const std::vector<double> fa = a.flatten(), fb = b.flatten();
  std::vector<InterpolationPoint> out;
  MaskedNetwork mid = a;
  std::vector<double> f(fa.size());
  for (double alpha : grid) {
    const MaskedNetwork* eval = &mid;
    if (alpha == 0.0) {
      eval = &a;
    } else if (alpha == 1.0) {
      eval = &b;
    } else {
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = (1.0 - alpha) * fa[i] + alpha * fb[i];
      mid.assign(f);
    }
    const EvalResult r = evaluate(*eval, inputs, labels);
    out.push_back({alpha, r.loss, r.accuracy});
  }
  return out;
}

}  // namespace sparselab
