#include "lmforge/schedules.hpp"

#include <algorithm>

#include "lmforge/errors.hpp"

namespace lmforge {

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::zero:
      return "zero";
    case ScheduleKind::constant:
      return "constant";
    case ScheduleKind::linear:
      return "linear";
    case ScheduleKind::cyclical:
      return "cyclical";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  for (ScheduleKind k : {ScheduleKind::zero, ScheduleKind::constant, ScheduleKind::linear,
                         ScheduleKind::cyclical})
    if (to_string(k) == name) return k;
  throw UsageError("unknown schedule '" + std::string(name) +
                   "' (allowed: zero, constant, linear, cyclical)");
}

void Schedule::validate() const {
  if (total_steps == 0) throw ContractError("schedule: total steps must be positive");
  if (kind == ScheduleKind::cyclical) {
    if (cycles == 0) throw ContractError("schedule: cycle count must be positive");
    if (!(anneal_ratio > 0.0 && anneal_ratio <= 1.0))
      throw ContractError("schedule: R must lie in (0, 1]");
  }
  if (kind == ScheduleKind::linear && !(linear_ratio > 0.0 && linear_ratio <= 1.0))
    throw ContractError("schedule: R_lin must lie in (0, 1]");
}

std::uint64_t Schedule::cycle_length() const { return (total_steps + cycles - 1) / cycles; }

double beta_at(const Schedule& s, std::uint64_t step) {
  s.validate();
  if (step >= s.total_steps)
    throw ContractError("schedule: step " + std::to_string(step) + " outside [0, " +
                        std::to_string(s.total_steps) + ")");
  switch (s.kind) {
    case ScheduleKind::zero:
      return 0.0;
    case ScheduleKind::constant:
      return 1.0;
    case ScheduleKind::linear: {
      if (s.total_steps == 1) return 1.0;
      const double span = s.linear_ratio * static_cast<double>(s.total_steps - 1);
      return std::min(1.0, static_cast<double>(step) / span);
    }
    case ScheduleKind::cyclical: {
      const std::uint64_t len = s.cycle_length();
      const double tau = static_cast<double>(step % len);
      return std::min(1.0, tau / (s.anneal_ratio * static_cast<double>(len)));
    }
  }
  return 0.0;
}

std::vector<std::pair<std::uint64_t, double>> beta_trace(const Schedule& s) {
  std::vector<std::pair<std::uint64_t, double>> trace;
  trace.reserve(s.total_steps);
  for (std::uint64_t t = 0; t < s.total_steps; ++t) trace.emplace_back(t, beta_at(s, t));
  return trace;
}

}  // namespace lmforge
