#pragma once

#include <string>
#include <vector>

#include "ehrd3pm/types.hpp"

namespace ehrd3pm {

enum class ScheduleKind { Cosine, Linear };

// Corruption schedule. retention[t-1] is the probability mass kept on the
// previous token at step t (the beta_t of the forward kernel, not a Gaussian
// variance); alpha_bar[t] is the running product with alpha_bar[0] = 1.
// Immutable after construction.
struct Schedule {
  Index horizon = 0; // T
  Vec retention;     // T entries, 1-indexed step t at retention[t-1]
  Vec alpha_bar;     // T+1 entries, alpha_bar[t] = prod_{s<=t} retention[s-1]

  double beta(int t) const { return retention[t - 1]; }
  double abar(int t) const { return alpha_bar[t]; }

  // builds the cumulative products; no prior-quality validation
  static Schedule from_retention(const Vec& retention);
};

struct ScheduleParams {
  double cosine_s = 0.008;
  // linear-in-alpha_bar endpoints: alpha_bar at t=1 and t=T
  double linear_abar_start = 0.9999;
  double linear_abar_end = 5e-4;
};

// Validated constructor: enforces alpha_bar[T] <= 1e-3 so the terminal
// marginal is close enough to uniform for the prior KL term to vanish.
Schedule build_schedule(ScheduleKind kind, Index horizon, const ScheduleParams& params = {});

ScheduleKind schedule_kind_from_string(const std::string& name);
std::string to_string(ScheduleKind kind);

} // namespace ehrd3pm
