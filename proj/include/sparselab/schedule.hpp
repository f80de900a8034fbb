#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sparselab {

enum class LrScheduleKind { Constant, Cosine, WarmupStep };

std::string to_string(LrScheduleKind kind);
LrScheduleKind parse_lr_schedule(const std::string& name);

/// Learning rate as a function of the global step.
///   cosine:      lr0/2 * (1 + cos(pi t / T)), 0 for t >= T
///   warmup-step: lr0 * (t+1)/W during the first W steps, then lr0 scaled by
///                `drop_factor` once for every entry of `drop_steps` that is <= t
struct LrSchedule {
  LrScheduleKind kind = LrScheduleKind::Cosine;
  double lr0 = 0.1;
  std::uint64_t total_steps = 1;
  std::uint64_t warmup_steps = 0;
  std::vector<std::uint64_t> drop_steps;
  double drop_factor = 0.1;

  double at(std::uint64_t step) const;
};

enum class DropSchedule { Cosine, LrCoupled };

std::string to_string(DropSchedule s);
DropSchedule parse_drop_schedule(const std::string& name);

}  // namespace sparselab
