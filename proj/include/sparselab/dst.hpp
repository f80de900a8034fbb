#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sparselab/init.hpp"
#include "sparselab/model.hpp"
#include "sparselab/network.hpp"
#include "sparselab/rng.hpp"
#include "sparselab/schedule.hpp"

namespace sparselab {

enum class DstMethod { None, Set, Rigl, RiglInverted };

std::string to_string(DstMethod m);
DstMethod parse_dst_method(const std::string& name);

struct DstConfig {
  DstMethod method = DstMethod::None;
  double alpha0 = 0.3;          // initial drop fraction
  std::uint64_t frequency = 100;
  std::uint64_t t_end = 0;      // no updates at or after this step
  DropSchedule schedule = DropSchedule::Cosine;

  /// Throws ConfigError unless 0 < alpha0 < 1 and frequency >= 1.
  void validate() const;
  /// Updates happen at steps t > 0 with t % frequency == 0 and t < t_end.
  bool is_update_step(std::uint64_t step) const;
};

/// Drop fraction at `step`; 0 past t_end. The lr-coupled schedule needs `lr`.
double drop_fraction(const DstConfig& cfg, std::uint64_t step, const LrSchedule* lr = nullptr);

struct LayerUpdate {
  std::size_t layer;                 // network layer index
  std::vector<std::size_t> dropped;  // flat indices within the layer weight
  std::vector<std::size_t> grown;
  std::size_t shortfall = 0;         // requested k minus connections actually moved
};

struct UpdateReport {
  std::uint64_t step = 0;
  double drop_fraction = 0.0;
  std::vector<LayerUpdate> layers;

  /// Flat-layout coordinates touched by the update (dropped and grown).
  std::vector<std::size_t> changed_coordinates(const MaskedNetwork& net) const;
  std::size_t total_moved() const;
};

/// One drop/grow round at a fixed drop fraction. `dense_grad` covers the full
/// parameter layout including masked-out weights. Per layer, k = round(alpha *
/// active) smallest-|w| active weights are dropped and k inactive positions
/// (inactive before the update) are grown by the method's criterion, at weight
/// 0. When fewer than k positions are inactive, only that many move.
/// Ties in magnitude or gradient go to the lowest flat index.
UpdateReport dst_update_fraction(MaskedNetwork& net, const GradientVector& dense_grad, DstMethod method, double alpha,
                                 Rng& rng);

/// Scheduled update: drop fraction from the config at `step`.
UpdateReport dst_update(MaskedNetwork& net, const GradientVector& dense_grad, const DstConfig& cfg,
                        std::uint64_t step, Rng& rng, const LrSchedule* lr = nullptr);

/// Grow set a SET update draws: rejection sampling of uniform flat indices in
/// [0, n) until `k` distinct indices from `eligible` are collected.
std::vector<std::size_t> set_grow_sample(std::size_t n, const std::vector<std::uint8_t>& eligible, std::size_t k,
                                         Rng& rng);

enum class PruneScope { PerLayer, Global };

struct PruneConfig {
  double target = 0.0;  // final sparsity s_f
  std::uint64_t t_start = 0;
  std::uint64_t t_end = 0;
  std::uint64_t frequency = 100;
  PruneScope scope = PruneScope::PerLayer;
  std::vector<std::size_t> exclude;  // weighted-layer ordinals never pruned

  bool enabled() const { return target > 0.0; }
  void validate() const;
  /// t_start <= step <= t_end on the frequency grid (t_end always included).
  bool is_prune_step(std::uint64_t step) const;
};

/// s_f * (1 - (1 - (t - t_start)/(t_end - t_start))^3), clamped to [0, s_f].
double prune_target(const PruneConfig& cfg, std::uint64_t step);

struct PruneReport {
  double target = 0.0;
  std::size_t removed = 0;
};

/// Masks the smallest-|w| active weights until each layer (or the whole
/// network under global scope) reaches the scheduled sparsity. Never regrows.
PruneReport prune_step(MaskedNetwork& net, const PruneConfig& cfg, std::uint64_t step);
/// Pruning to an explicit sparsity.
PruneReport prune_to(MaskedNetwork& net, double sparsity, PruneScope scope, const std::vector<std::size_t>& exclude = {});

struct LotteryState {
  std::uint64_t k = 0;
  MaskedNetwork dense_init;       // theta^0
  MaskedNetwork ticket;           // theta^K * M
  MaskedNetwork pruned_solution;  // theta^N, support defines M
};

/// Builds the lottery ticket from a pruning run's checkpoints (by step) and its
/// final network. Throws Error when step 0 or step K was not checkpointed.
LotteryState extract_lottery(const std::map<std::uint64_t, MaskedNetwork>& checkpoints,
                             const MaskedNetwork& pruned_solution, std::uint64_t k);

/// Same masks as `mask_source`, freshly initialized weights, step 0.
MaskedNetwork make_scratch(const MaskedNetwork& mask_source, const InitScheme& scheme, Rng& rng);

}  // namespace sparselab
