#include "sparselab/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "sparselab/error.hpp"

namespace sparselab {

std::string to_string(LrScheduleKind kind) {
  switch (kind) {
    case LrScheduleKind::Constant: return "constant";
    case LrScheduleKind::Cosine: return "cosine";
    case LrScheduleKind::WarmupStep: return "warmup-step";
  }
  return "unknown";
}

LrScheduleKind parse_lr_schedule(const std::string& name) {
  if (name == "constant") return LrScheduleKind::Constant;
  if (name == "cosine") return LrScheduleKind::Cosine;
  if (name == "warmup-step" || name == "step") return LrScheduleKind::WarmupStep;
  throw ConfigError(fmt::format("unknown lr schedule '{}'", name));
}

double LrSchedule::at(std::uint64_t step) const {
  switch (kind) {
    case LrScheduleKind::Constant: return lr0;
    case LrScheduleKind::Cosine: {
      if (total_steps == 0 || step >= total_steps) return 0.0;
      const double x = static_cast<double>(step) / static_cast<double>(total_steps);
      return lr0 / 2.0 * (1.0 + std::cos(std::numbers::pi * x));
    }
    case LrScheduleKind::WarmupStep: {
      if (step < warmup_steps) return lr0 * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
      const auto drops = std::count_if(drop_steps.begin(), drop_steps.end(), [&](std::uint64_t d) { return d <= step; });
      return lr0 * std::pow(drop_factor, static_cast<double>(drops));
    }
  }
  return lr0;
}

std::string to_string(DropSchedule s) { return s == DropSchedule::Cosine ? "cosine" : "lr-coupled"; }

DropSchedule parse_drop_schedule(const std::string& name) {
  if (name == "cosine") return DropSchedule::Cosine;
  if (name == "lr-coupled" || name == "lr") return DropSchedule::LrCoupled;
  throw ConfigError(fmt::format("unknown drop-fraction schedule '{}'", name));
}

}  // namespace sparselab
