#include "saql/schedules.hpp"

#include <cmath>

#include "saql/stats.hpp"

namespace saql {

std::string to_string(ScheduleViolation v) {
  switch (v) {
    case ScheduleViolation::eta0_not_positive:
      return "eta0 must be > 0";
    case ScheduleViolation::batch0_zero:
      return "batch0 must be >= 1";
    case ScheduleViolation::rho_out_of_range:
      return "rho out of (1/2,1)";
    case ScheduleViolation::beta_negative:
      return "beta < 0";
    case ScheduleViolation::beta_too_large:
      return "beta >= 2*rho-1";
    case ScheduleViolation::beta_not_below_one:
      return "beta >= 1";
  }
  return "unknown violation";
}

namespace {

std::optional<ScheduleViolation> validate_common(const ScheduleConfig& cfg) {
  if (!(cfg.eta0 > 0.0)) return ScheduleViolation::eta0_not_positive;
  if (cfg.batch0 < 1) return ScheduleViolation::batch0_zero;
  if (!(cfg.rho > 0.5 && cfg.rho < 1.0)) return ScheduleViolation::rho_out_of_range;
  if (!(cfg.beta >= 0.0)) return ScheduleViolation::beta_negative;
  return std::nullopt;
}

}  // namespace

std::optional<ScheduleViolation> validate(const ScheduleConfig& cfg) {
  if (auto v = validate_common(cfg)) return v;
  if (!(cfg.beta < 2.0 * cfg.rho - 1.0)) return ScheduleViolation::beta_too_large;
  return std::nullopt;
}

std::optional<ScheduleViolation> validate_relaxed(const ScheduleConfig& cfg) {
  if (auto v = validate_common(cfg)) return v;
  if (!(cfg.beta < 1.0)) return ScheduleViolation::beta_not_below_one;
  return std::nullopt;
}

void require_valid(const ScheduleConfig& cfg, bool enforce_rate_coupling) {
  const auto v = enforce_rate_coupling ? validate(cfg) : validate_relaxed(cfg);
  if (v) throw ScheduleError(*v);
}

double eta(const ScheduleConfig& cfg, std::size_t t) {
  if (t == 0) throw std::invalid_argument("eta: t must be >= 1");
  return cfg.eta0 * std::pow(static_cast<double>(t), -cfg.rho);
}

double step_size(const ScheduleConfig& cfg, std::size_t t) { return std::min(1.0, eta(cfg, t)); }

std::size_t batch(const ScheduleConfig& cfg, std::size_t t) {
  if (t == 0) throw std::invalid_argument("batch: t must be >= 1");
  if (cfg.beta == 0.0) return cfg.batch0;
  const double x = std::pow(static_cast<double>(t), cfg.beta);
  const double nearest = std::round(x);
  const double c = std::abs(x - nearest) <= 1e-9 * std::max(1.0, x) ? nearest : std::ceil(x);
  return cfg.batch0 * static_cast<std::size_t>(c);
}

double batch_inverse_sum(const ScheduleConfig& cfg, std::size_t T) {
  if (T == 0) throw std::invalid_argument("batch_inverse_sum: T must be >= 1");
  CompensatedSum s;
  for (std::size_t t = 1; t <= T; ++t) s.add(1.0 / static_cast<double>(batch(cfg, t)));
  return s.value();
}

std::string to_string(BatchIndexMode mode) {
  return mode == BatchIndexMode::global_step ? "global-step" : "within-episode-step";
}

BatchIndexMode parse_batch_index_mode(const std::string& s) {
  if (s == "global-step") return BatchIndexMode::global_step;
  if (s == "within-episode-step") return BatchIndexMode::within_episode_step;
  throw std::invalid_argument("unknown batch_index_mode '" + s +
                              "' (expected global-step or within-episode-step)");
}

}  // namespace saql
