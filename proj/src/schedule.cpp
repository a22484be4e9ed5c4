#include "ehrd3pm/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "ehrd3pm/error.hpp"

namespace ehrd3pm {

namespace {
constexpr double kRetentionFloor = 1e-5;
constexpr double kPriorTolerance = 1e-3;
} // namespace

Schedule Schedule::from_retention(const Vec& retention) {
  Schedule s;
  s.horizon = retention.size();
  require(s.horizon >= 1, Err::InvalidHorizon, "schedule needs T >= 1");
  s.retention = retention;
  s.alpha_bar.resize(s.horizon + 1);
  s.alpha_bar[0] = 1.0;
  for (Index t = 1; t <= s.horizon; ++t) {
    const double beta = retention[t - 1];
    require(beta > 0.0 && beta <= 1.0, Err::DegenerateSchedule, "retention outside (0,1]");
    s.alpha_bar[t] = s.alpha_bar[t - 1] * beta;
  }
  return s;
}

Schedule build_schedule(ScheduleKind kind, Index horizon, const ScheduleParams& params) {
  require(horizon >= 1, Err::InvalidHorizon, "T must be >= 1");
  Vec retention(horizon);

  switch (kind) {
    case ScheduleKind::Cosine: {
      require(params.cosine_s > 0.0, Err::InvalidConfig, "cosine offset must be positive");
      const double s = params.cosine_s;
      const auto f = [&](double t) {
        const double arg = ((t / static_cast<double>(horizon) + s) / (1.0 + s)) * M_PI / 2.0;
        const double c = std::cos(arg);
        return c * c;
      };
      const double f0 = f(0.0);
      double abar_prev = 1.0;
      for (Index t = 1; t <= horizon; ++t) {
        const double abar_t = f(static_cast<double>(t)) / f0;
        double beta = abar_t / abar_prev;
        beta = std::clamp(beta, kRetentionFloor, 1.0);
        retention[t - 1] = beta;
        abar_prev *= beta;
      }
      break;
    }
    case ScheduleKind::Linear: {
      const double a1 = params.linear_abar_start;
      const double aT = params.linear_abar_end;
      require(aT > 0.0 && aT < a1 && a1 <= 1.0, Err::InvalidConfig,
              "linear schedule needs 0 < abar_end < abar_start <= 1");
      // alpha_bar interpolated over t = 1..T; alpha_bar[0] stays 1
      double abar_prev = 1.0;
      for (Index t = 1; t <= horizon; ++t) {
        const double frac = horizon == 1 ? 1.0
                                         : static_cast<double>(t - 1) / static_cast<double>(horizon - 1);
        const double abar_t = a1 + frac * (aT - a1);
        double beta = abar_t / abar_prev;
        beta = std::clamp(beta, kRetentionFloor, 1.0);
        retention[t - 1] = beta;
        abar_prev *= beta;
      }
      break;
    }
  }

  Schedule s = Schedule::from_retention(retention);
  if (s.alpha_bar[s.horizon] > kPriorTolerance)
    throw_validation(Err::DegenerateSchedule,
                     "alpha_bar[T] = " + std::to_string(s.alpha_bar[s.horizon]) +
                         " exceeds 1e-3; terminal marginal too far from uniform");
  return s;
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "cosine") return ScheduleKind::Cosine;
  if (name == "linear") return ScheduleKind::Linear;
  throw_validation(Err::InvalidConfig, "unknown schedule kind '" + name + "'");
}

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::Cosine ? "cosine" : "linear";
}

} // namespace ehrd3pm
