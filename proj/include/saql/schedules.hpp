#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace saql {

enum class BatchIndexMode { global_step, within_episode_step };

/// Step size eta_t = eta0 * t^-rho and batch size B_t = batch0 * ceil(t^beta).
struct ScheduleConfig {
  double eta0 = 1.0;
  double rho = 0.67;
  std::size_t batch0 = 1;
  double beta = 0.0;
  BatchIndexMode batch_index_mode = BatchIndexMode::global_step;
};

enum class ScheduleViolation {
  eta0_not_positive,
  batch0_zero,
  rho_out_of_range,
  beta_negative,
  beta_too_large,  // beta >= 2*rho - 1
  beta_not_below_one,
};

std::string to_string(ScheduleViolation v);

class ScheduleError : public std::invalid_argument {
 public:
  explicit ScheduleError(ScheduleViolation v)
      : std::invalid_argument("invalid schedule: " + to_string(v)), violation_(v) {}
  ScheduleViolation violation() const { return violation_; }

 private:
  ScheduleViolation violation_;
};

/// Checks the rate conditions eta0 > 0, batch0 >= 1, rho in (1/2,1) and
/// beta in [0, 2*rho - 1). Returns the first violated bound.
std::optional<ScheduleViolation> validate(const ScheduleConfig& cfg);

/// Same bounds except beta is only required to lie in [0,1). The usual
/// experiments pair rho = 0.67 with beta = 0.5, which this admits.
std::optional<ScheduleViolation> validate_relaxed(const ScheduleConfig& cfg);

/// Throws ScheduleError on the first violation.
void require_valid(const ScheduleConfig& cfg, bool enforce_rate_coupling = true);

double eta(const ScheduleConfig& cfg, std::size_t t);

/// Step size actually applied by the update: eta capped at 1 so that the
/// update stays a convex combination when eta0 > 1.
double step_size(const ScheduleConfig& cfg, std::size_t t);

std::size_t batch(const ScheduleConfig& cfg, std::size_t t);

/// sum_{t=1}^T 1 / batch(cfg, t), compensated.
double batch_inverse_sum(const ScheduleConfig& cfg, std::size_t T);

std::string to_string(BatchIndexMode mode);
BatchIndexMode parse_batch_index_mode(const std::string& s);

}  // namespace saql
