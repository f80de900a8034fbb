#pragma once

#include <vector>

#include "sparselab/init.hpp"
#include "sparselab/network.hpp"
#include "sparselab/sparsity.hpp"

namespace sparselab {

/// Standard deviation of each weighted layer's pre-activation for standard
/// normal inputs. The last entry is the pre-softmax output.
struct ProbeResult {
  std::vector<double> layer_std;
  std::size_t n_samples = 0;
  double output_std() const { return layer_std.back(); }
};

/// Std is taken over the units of a layer for each sample, then averaged over
/// samples. Throws ConfigError when n_samples is 0.
ProbeResult signal_probe(const MaskedNetwork& net, std::size_t n_samples, Rng& rng);

struct ProbeRecord {
  double sparsity;
  std::string scheme;
  std::uint64_t seed;
  std::size_t layer_index;  // weighted-layer ordinal
  double std;
};

struct ProbeSweep {
  std::vector<double> sparsities;
  std::vector<InitScheme> schemes;
  std::size_t seeds = 5;
  std::uint64_t base_seed = 0;
  std::size_t n_samples = 256;
  DistributionKind distribution = DistributionKind::Uniform;
};

/// Cartesian product of sparsities x schemes x seeds. Every scheme sees the same
/// mask and the same probe inputs for a given (sparsity, seed).
std::vector<ProbeRecord> sweep_sparsity_probe(const NetworkSpec& spec, const ProbeSweep& sweep);

}  // namespace sparselab
