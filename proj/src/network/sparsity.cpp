#include "sparselab/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "sparselab/error.hpp"

namespace sparselab {

std::string to_string(DistributionKind kind) {
  switch (kind) {
    case DistributionKind::Uniform: return "uniform";
    case DistributionKind::Erk: return "erk";
    case DistributionKind::Explicit: return "explicit";
  }
  return "unknown";
}

DistributionKind parse_distribution(const std::string& name) {
  if (name == "uniform") return DistributionKind::Uniform;
  if (name == "erk" || name == "ERK") return DistributionKind::Erk;
  if (name == "explicit") return DistributionKind::Explicit;
  throw ConfigError(fmt::format("unknown sparsity distribution '{}'", name));
}

double erk_scale(const Shape& weight_shape) {
  double sum = 0.0, prod = 1.0;
  for (std::size_t d : weight_shape) {
    sum += static_cast<double>(d);
    prod *= static_cast<double>(d);
  }
  return sum / prod;
}

std::vector<double> plan_densities(const MaskedNetwork& net, const SparsityDistribution& dist) {
  if (!(dist.sparsity >= 0.0 && dist.sparsity < 1.0)) {
    throw ConfigError(fmt::format("sparsity {} outside [0, 1)", dist.sparsity));
  }
  const std::vector<std::size_t> weighted = net.weighted_layers();
  const std::size_t n_layers = weighted.size();
  std::vector<double> sizes(n_layers);
  std::vector<Shape> shapes(n_layers);
  for (std::size_t i = 0; i < n_layers; ++i) {
    shapes[i] = net.layer(weighted[i]).weight.shape();
    sizes[i] = static_cast<double>(net.layer(weighted[i]).weight.size());
  }
  for (std::size_t d : dist.dense_layers) {
    if (d >= n_layers) throw ConfigError(fmt::format("dense layer ordinal {} but only {} weighted layers", d, n_layers));
  }

  if (dist.kind == DistributionKind::Explicit) {
    if (dist.densities.size() != n_layers) {
      throw ConfigError(fmt::format("explicit distribution lists {} densities for {} weighted layers",
                                    dist.densities.size(), n_layers));
    }
    for (double d : dist.densities)
      if (!(d >= 0.0 && d <= 1.0)) throw ConfigError(fmt::format("explicit density {} outside [0, 1]", d));
    return dist.densities;
  }

  const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0);
  const double budget_total = (1.0 - dist.sparsity) * total;
  std::vector<bool> dense(n_layers, false);
  for (std::size_t d : dist.dense_layers) dense[d] = true;
  std::vector<double> raw(n_layers, 1.0);
  if (dist.kind == DistributionKind::Erk)
    for (std::size_t i = 0; i < n_layers; ++i) raw[i] = erk_scale(shapes[i]);

  std::vector<double> density(n_layers, 1.0);
  for (;;) {
    double budget = budget_total, divisor = 0.0;
    for (std::size_t i = 0; i < n_layers; ++i) {
      if (dense[i]) budget -= sizes[i];
      else divisor += raw[i] * sizes[i];
    }
    if (budget < -0.5) {
      throw ConfigError(fmt::format("sparsity {} unreachable: dense layers alone exceed the weight budget",
                                    dist.sparsity));
    }
    if (divisor == 0.0) {
      if (budget > 0.5) throw ConfigError(fmt::format("sparsity {} unreachable: every layer is dense", dist.sparsity));
      break;
    }
    const double eps = std::max(budget, 0.0) / divisor;
    // Densify the layer with the largest scaled density if it overflows, then
    // redistribute; one layer per round.
    std::size_t worst = n_layers;
    double worst_raw = 0.0;
    for (std::size_t i = 0; i < n_layers; ++i) {
      if (dense[i]) continue;
      if (eps * raw[i] > 1.0 && raw[i] > worst_raw) {
        worst = i;
        worst_raw = raw[i];
      }
    }
    if (worst == n_layers) {
      for (std::size_t i = 0; i < n_layers; ++i) density[i] = dense[i] ? 1.0 : eps * raw[i];
      break;
    }
    dense[worst] = true;
  }
  return density;
}

AllocationReport allocate_sparsity(MaskedNetwork& net, const SparsityDistribution& dist, Rng& rng) {
  const std::vector<double> density = plan_densities(net, dist);
  const std::vector<std::size_t> weighted = net.weighted_layers();
  AllocationReport report;
  std::size_t active_total = 0, total = 0;
  for (std::size_t i = 0; i < weighted.size(); ++i) {
    Layer& layer = net.layer(weighted[i]);
    const std::size_t n = layer.weight.size();
    const auto k = static_cast<std::size_t>(std::llround(std::clamp(density[i], 0.0, 1.0) * static_cast<double>(n)));
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    std::sample(all.begin(), all.end(), std::back_inserter(chosen), static_cast<std::ptrdiff_t>(k), rng);
    std::vector<std::uint8_t> bits(n, 0);
    for (std::size_t idx : chosen) bits[idx] = 1;
    net.set_mask(weighted[i], Mask(layer.weight.shape(), std::move(bits)));
    report.active_per_layer.push_back(k);
    active_total += k;
    total += n;
  }
  report.realized_sparsity = total == 0 ? 0.0 : 1.0 - static_cast<double>(active_total) / static_cast<double>(total);
  if (dist.kind != DistributionKind::Explicit && std::abs(report.realized_sparsity - dist.sparsity) > 0.005) {
    throw ConfigError(fmt::format("realized sparsity {:.4f} misses target {:.4f} by more than 0.5 points",
                                  report.realized_sparsity, dist.sparsity));
  }
  return report;
}

}  // namespace sparselab
