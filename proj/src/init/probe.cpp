#include "sparselab/probe.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sparselab/error.hpp"
#include "sparselab/model.hpp"

namespace sparselab {

ProbeResult signal_probe(const MaskedNetwork& net, std::size_t n_samples, Rng& rng) {
  if (n_samples == 0) throw ConfigError("signal probe needs at least one sample");
  const std::size_t dim = shape_size(net.spec().input);
  const std::size_t n_layers = net.weighted_layers().size();
  std::normal_distribution<double> normal(0.0, 1.0);
  ProbeResult result;
  result.n_samples = n_samples;
  result.layer_std.assign(n_layers, 0.0);

  constexpr std::size_t kChunk = 256;
  for (std::size_t begin = 0; begin < n_samples; begin += kChunk) {
    const std::size_t b = std::min(kChunk, n_samples - begin);
    Tensor x({b, dim});
    for (double& v : x.data()) v = normal(rng);
    ForwardPass pass = forward(net, x, {});
    for (std::size_t l = 0; l < n_layers; ++l) {
      const Tensor& z = pass.tape.value(pass.preactivations[l]);
      const std::size_t units = z.size() / b;
      for (std::size_t s = 0; s < b; ++s) {
        const double* row = z.raw() + s * units;
        double mean = 0.0;
        for (std::size_t u = 0; u < units; ++u) mean += row[u];
        mean /= static_cast<double>(units);
        double ss = 0.0;
        for (std::size_t u = 0; u < units; ++u) ss += (row[u] - mean) * (row[u] - mean);
        result.layer_std[l] += std::sqrt(ss / static_cast<double>(units));
      }
    }
  }
  for (double& s : result.layer_std) s /= static_cast<double>(n_samples);
  return result;
}

std::vector<ProbeRecord> sweep_sparsity_probe(const NetworkSpec& spec, const ProbeSweep& sweep) {
  if (sweep.schemes.empty() || sweep.sparsities.empty() || sweep.seeds == 0) {
    throw ConfigError("probe sweep needs at least one sparsity, scheme, and seed");
  }
  std::vector<ProbeRecord> records;
  for (double s : sweep.sparsities) {
    for (std::size_t k = 0; k < sweep.seeds; ++k) {
      const std::uint64_t seed = sweep.base_seed + k;
      MaskedNetwork net = MaskedNetwork::build(spec);
      Rng mask_rng = make_rng(seed, {kStreamMask});
      allocate_sparsity(net, {.kind = sweep.distribution, .sparsity = s}, mask_rng);
      for (const InitScheme& scheme : sweep.schemes) {
        Rng init_rng = make_rng(seed, {kStreamInit});
        initialize(net, scheme, init_rng);
        Rng probe_rng = make_rng(seed, {kStreamProbe});
        const ProbeResult r = signal_probe(net, sweep.n_samples, probe_rng);
        for (std::size_t l = 0; l < r.layer_std.size(); ++l) records.push_back({s, scheme.name(), seed, l, r.layer_std[l]});
      }
    }
  }
  return records;
}

}  // namespace sparselab
