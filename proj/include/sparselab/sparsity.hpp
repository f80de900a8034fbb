#pragma once

#include <string>
#include <vector>

#include "sparselab/network.hpp"
#include "sparselab/rng.hpp"

namespace sparselab {

enum class DistributionKind { Uniform, Erk, Explicit };

std::string to_string(DistributionKind kind);
DistributionKind parse_distribution(const std::string& name);

/// How a global sparsity target is split across weighted layers.
struct SparsityDistribution {
  DistributionKind kind = DistributionKind::Uniform;
  double sparsity = 0.0;
  /// Weighted-layer ordinals (0 = first weighted layer) kept dense.
  std::vector<std::size_t> dense_layers;
  /// Per weighted layer densities, used by DistributionKind::Explicit.
  std::vector<double> densities;
};

/// Erdos-Renyi-kernel scale factor: sum(dims) / prod(dims) of a weight shape.
double erk_scale(const Shape& weight_shape);

/// Planned density of every weighted layer. ERK layers whose scaled density
/// would exceed 1 are made dense and the remaining budget is redistributed.
/// Throws ConfigError when the target cannot be met.
std::vector<double> plan_densities(const MaskedNetwork& net, const SparsityDistribution& dist);

struct AllocationReport {
  std::vector<std::size_t> active_per_layer;
  double realized_sparsity = 0.0;
};

/// Draws a fresh mask for every weighted layer: active positions are sampled
/// uniformly without replacement according to the planned density. Weights at
/// masked-out positions are zeroed.
AllocationReport allocate_sparsity(MaskedNetwork& net, const SparsityDistribution& dist, Rng& rng);

}  // namespace sparselab
