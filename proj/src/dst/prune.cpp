#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sparselab/dst.hpp"
#include "sparselab/error.hpp"

namespace sparselab {

void PruneConfig::validate() const {
  if (!enabled()) return;
  if (!(target < 1.0)) throw ConfigError(fmt::format("pruning target {} must be below 1", target));
  if (!(t_start < t_end)) throw ConfigError(fmt::format("pruning needs t_start < t_end (got {} and {})", t_start, t_end));
  if (frequency == 0) throw ConfigError("pruning frequency must be at least 1");
}

bool PruneConfig::is_prune_step(std::uint64_t step) const {
  if (!enabled() || step < t_start || step > t_end) return false;
  return step == t_end || (step - t_start) % frequency == 0;
}

double prune_target(const PruneConfig& cfg, std::uint64_t step) {
  if (step <= cfg.t_start) return 0.0;
  if (step >= cfg.t_end) return cfg.target;
  const double x = static_cast<double>(step - cfg.t_start) / static_cast<double>(cfg.t_end - cfg.t_start);
  const double r = 1.0 - x;
  return cfg.target * (1.0 - r * r * r);
}

namespace {

struct Candidate {
  double magnitude;
  std::size_t layer;
  std::size_t index;
};

bool smaller(const Candidate& a, const Candidate& b) {
  if (a.magnitude != b.magnitude) return a.magnitude < b.magnitude;
  if (a.layer != b.layer) return a.layer < b.layer;
  return a.index < b.index;
}

void deactivate(MaskedNetwork& net, const std::vector<Candidate>& chosen) {
  for (std::size_t li : net.weighted_layers()) {
    Mask mask = net.layer(li).mask;
    bool touched = false;
    for (const Candidate& c : chosen) {
      if (c.layer != li) continue;
      mask.set(c.index, false);
      touched = true;
    }
    if (touched) net.set_mask(li, std::move(mask));
  }
}

}  // namespace

PruneReport prune_to(MaskedNetwork& net, double sparsity, PruneScope scope, const std::vector<std::size_t>& exclude) {
  PruneReport report;
  report.target = sparsity;
  const auto weighted = net.weighted_layers();
  std::vector<bool> skip(weighted.size(), false);
  for (std::size_t e : exclude)
    if (e < weighted.size()) skip[e] = true;

  std::vector<Candidate> chosen;
  if (scope == PruneScope::PerLayer) {
    for (std::size_t o = 0; o < weighted.size(); ++o) {
      if (skip[o]) continue;
      const Layer& l = net.layer(weighted[o]);
      const std::size_t n = l.weight.size();
      const auto keep = n - static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(n)));
      const std::size_t active = l.mask.count();
      if (active <= keep) continue;
      std::vector<Candidate> cand;
      for (std::size_t i = 0; i < n; ++i)
        if (l.mask.active(i)) cand.push_back({std::abs(l.weight[i]), weighted[o], i});
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(active - keep), cand.end(), smaller);
      chosen.insert(chosen.end(), cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(active - keep));
    }
  } else {
    std::size_t total = 0, active = 0;
    std::vector<Candidate> cand;
    for (std::size_t o = 0; o < weighted.size(); ++o) {
      if (skip[o]) continue;
      const Layer& l = net.layer(weighted[o]);
      total += l.weight.size();
      for (std::size_t i = 0; i < l.weight.size(); ++i) {
        if (!l.mask.active(i)) continue;
        ++active;
        cand.push_back({std::abs(l.weight[i]), weighted[o], i});
      }
    }
    const auto keep = total - static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(total)));
    if (active > keep) {
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(active - keep), cand.end(), smaller);
      chosen.assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(active - keep));
    }
  }
  deactivate(net, chosen);
  report.removed = chosen.size();
  return report;
}

PruneReport prune_step(MaskedNetwork& net, const PruneConfig& cfg, std::uint64_t step) {
  return prune_to(net, prune_target(cfg, step), cfg.scope, cfg.exclude);
}

}  // namespace sparselab
