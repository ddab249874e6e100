#pragma once

// KL-weight (beta) schedules over optimizer steps.
//
//   zero      beta = 0
//   constant  beta = 1
//   linear    beta = min(1, t / (r_lin * (T - 1)))
//   cyclical  L = ceil(T / M), tau = t mod L, beta = min(1, tau / (R * L))

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lmforge {

enum class ScheduleKind { zero, constant, linear, cyclical };

std::string_view to_string(ScheduleKind kind);
// Throws UsageError listing the allowed names.
ScheduleKind parse_schedule_kind(std::string_view name);

struct Schedule {
  ScheduleKind kind = ScheduleKind::cyclical;
  std::uint64_t total_steps = 1;  // T
  std::uint64_t cycles = 4;       // M
  double anneal_ratio = 0.5;      // R
  double linear_ratio = 1.0;      // R_lin

  void validate() const;
  std::uint64_t cycle_length() const;
};

double beta_at(const Schedule& s, std::uint64_t step);

std::vector<std::pair<std::uint64_t, double>> beta_trace(const Schedule& s);

}  // namespace lmforge
