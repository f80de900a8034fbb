#include "sparselab/dst.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "sparselab/error.hpp"

namespace sparselab {

std::string to_string(DstMethod m) {
  switch (m) {
    case DstMethod::None: return "none";
    case DstMethod::Set: return "set";
    case DstMethod::Rigl: return "rigl";
    case DstMethod::RiglInverted: return "rigl-inverted";
  }
  return "unknown";
}

DstMethod parse_dst_method(const std::string& name) {
  if (name == "none" || name == "static") return DstMethod::None;
  if (name == "set" || name == "SET") return DstMethod::Set;
  if (name == "rigl" || name == "RigL") return DstMethod::Rigl;
  if (name == "rigl-inverted" || name == "RigL-inverted") return DstMethod::RiglInverted;
  throw ConfigError(fmt::format("unknown dst method '{}'", name));
}

void DstConfig::validate() const {
  if (method == DstMethod::None) return;
  if (!(alpha0 > 0.0 && alpha0 < 1.0)) throw ConfigError(fmt::format("drop fraction {} outside (0, 1)", alpha0));
  if (frequency == 0) throw ConfigError("dst update frequency must be at least 1");
}

bool DstConfig::is_update_step(std::uint64_t step) const {
  return method != DstMethod::None && step > 0 && frequency > 0 && step % frequency == 0 && step < t_end;
}

double drop_fraction(const DstConfig& cfg, std::uint64_t step, const LrSchedule* lr) {
  if (step > cfg.t_end) return 0.0;
  switch (cfg.schedule) {
    case DropSchedule::Cosine: {
      if (cfg.t_end == 0) return cfg.alpha0;
      const double x = static_cast<double>(step) / static_cast<double>(cfg.t_end);
      return cfg.alpha0 / 2.0 * (1.0 + std::cos(std::numbers::pi * x));
    }
    case DropSchedule::LrCoupled: {
      if (!lr) throw ConfigError("lr-coupled drop schedule needs the learning-rate schedule");
      const double base = lr->at(0);
      if (!(base > 0.0)) throw ConfigError("lr-coupled drop schedule needs a positive initial learning rate");
      return cfg.alpha0 * lr->at(step) / base;
    }
  }
  return 0.0;
}

std::vector<std::size_t> UpdateReport::changed_coordinates(const MaskedNetwork& net) const {
  std::vector<std::size_t> out;
  for (const LayerUpdate& u : layers) {
    const auto it = std::find_if(net.layout().blocks.begin(), net.layout().blocks.end(),
                                 [&](const ParamBlock& b) { return b.layer == u.layer && !b.is_bias; });
    if (it == net.layout().blocks.end()) continue;
    for (std::size_t i : u.dropped) out.push_back(it->offset + i);
    for (std::size_t i : u.grown) out.push_back(it->offset + i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t UpdateReport::total_moved() const {
  std::size_t n = 0;
  for (const LayerUpdate& u : layers) n += u.grown.size();
  return n;
}

std::vector<std::size_t> set_grow_sample(std::size_t n, const std::vector<std::uint8_t>& eligible, std::size_t k,
                                         Rng& rng) {
  std::vector<std::uint8_t> taken(n, 0);
  std::vector<std::size_t> out;
  out.reserve(k);
  if (n == 0) return out;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  while (out.size() < k) {
    const std::size_t i = pick(rng);
    if (!eligible[i] || taken[i]) continue;
    taken[i] = 1;
    out.push_back(i);
  }
  return out;
}

UpdateReport dst_update_fraction(MaskedNetwork& net, const GradientVector& dense_grad, DstMethod method, double alpha,
                                 Rng& rng) {
  const ParamLayout& layout = net.layout();
  if (dense_grad.size() != layout.total) {
    throw ShapeError(fmt::format("dst gradient has {} entries, network has {}", dense_grad.size(), layout.total));
  }
  UpdateReport report;
  report.drop_fraction = alpha;
  if (method == DstMethod::None || alpha <= 0.0) return report;

  for (const ParamBlock& block : layout.blocks) {
    if (block.is_bias) continue;
    Layer& layer = net.layer(block.layer);
    const std::size_t n = layer.weight.size();
    const std::span<const double> g(dense_grad.values.data() + block.offset, n);

    std::vector<std::size_t> active, inactive;
    for (std::size_t i = 0; i < n; ++i) (layer.mask.active(i) ? active : inactive).push_back(i);
    const auto k = static_cast<std::size_t>(std::llround(alpha * static_cast<double>(active.size())));
    const std::size_t moved = std::min({k, active.size(), inactive.size()});

    LayerUpdate u;
    u.layer = block.layer;
    u.shortfall = k - moved;
    if (moved > 0) {
      std::stable_sort(active.begin(), active.end(),
                       [&](std::size_t a, std::size_t b) { return std::abs(layer.weight[a]) < std::abs(layer.weight[b]); });
      u.dropped.assign(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(moved));

      switch (method) {
        case DstMethod::Rigl:
          std::stable_sort(inactive.begin(), inactive.end(),
                           [&](std::size_t a, std::size_t b) { return std::abs(g[a]) > std::abs(g[b]); });
          u.grown.assign(inactive.begin(), inactive.begin() + static_cast<std::ptrdiff_t>(moved));
          break;
        case DstMethod::RiglInverted:
          std::stable_sort(inactive.begin(), inactive.end(),
                           [&](std::size_t a, std::size_t b) { return std::abs(g[a]) < std::abs(g[b]); });
          u.grown.assign(inactive.begin(), inactive.begin() + static_cast<std::ptrdiff_t>(moved));
          break;
        case DstMethod::Set: {
          std::vector<std::uint8_t> eligible(n, 0);
          for (std::size_t i : inactive) eligible[i] = 1;
          u.grown = set_grow_sample(n, eligible, moved, rng);
          break;
        }
        case DstMethod::None: break;
      }
      Mask mask = layer.mask;
      for (std::size_t i : u.dropped) mask.set(i, false);
      for (std::size_t i : u.grown) mask.set(i, true);
      net.set_mask(block.layer, std::move(mask));
      for (std::size_t i : u.grown) layer.weight[i] = 0.0;
      std::sort(u.dropped.begin(), u.dropped.end());
      std::sort(u.grown.begin(), u.grown.end());
    }
    report.layers.push_back(std::move(u));
  }
  return report;
}

UpdateReport dst_update(MaskedNetwork& net, const GradientVector& dense_grad, const DstConfig& cfg,
                        std::uint64_t step, Rng& rng, const LrSchedule* lr) {
  cfg.validate();
  UpdateReport report = dst_update_fraction(net, dense_grad, cfg.method, drop_fraction(cfg, step, lr), rng);
  report.step = step;
  return report;
}

}  // namespace sparselab
