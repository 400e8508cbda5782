#include <gtest/gtest.h>

#include <cmath>

#include "saql/schedules.hpp"

using namespace saql;

namespace {

ScheduleConfig cfg(double eta0, double rho, std::size_t b, double beta) {
  ScheduleConfig c;
  c.eta0 = eta0;
  c.rho = rho;
  c.batch0 = b;
  c.beta = beta;
  return c;
}

std::optional<ScheduleViolation> check(const ScheduleConfig& c) { return validate(c); }

}  // namespace

TEST(Validate, AcceptsTableSetting) { EXPECT_FALSE(check(cfg(1, 0.67, 2, 0.3)).has_value()); }

TEST(Validate, NamesEachBound) {
  EXPECT_EQ(check(cfg(1, 0.67, 2, 0.35)), ScheduleViolation::beta_too_large);
  EXPECT_EQ(check(cfg(1, 0.5, 2, 0.0)), ScheduleViolation::rho_out_of_range);
  EXPECT_EQ(check(cfg(1, 1.0, 2, 0.0)), ScheduleViolation::rho_out_of_range);
  EXPECT_EQ(check(cfg(0, 0.67, 2, 0.0)), ScheduleViolation::eta0_not_positive);
  EXPECT_EQ(check(cfg(1, 0.67, 0, 0.0)), ScheduleViolation::batch0_zero);
  EXPECT_EQ(check(cfg(1, 0.67, 1, -0.1)), ScheduleViolation::beta_negative);
  EXPECT_EQ(to_string(ScheduleViolation::beta_too_large), "beta >= 2*rho-1");
  EXPECT_EQ(to_string(ScheduleViolation::rho_out_of_range), "rho out of (1/2,1)");
}

TEST(Validate, RelaxedAllowsCommonPairing) {
  const auto c = cfg(1, 0.67, 2, 0.5);
  EXPECT_EQ(validate(c), ScheduleViolation::beta_too_large);
  EXPECT_FALSE(validate_relaxed(c).has_value());
  EXPECT_EQ(validate_relaxed(cfg(1, 0.67, 2, 1.0)), ScheduleViolation::beta_not_below_one);
  EXPECT_THROW(require_valid(c), ScheduleError);
  EXPECT_NO_THROW(require_valid(c, false));
  try {
    require_valid(cfg(1, 0.4, 1, 0));
    FAIL();
  } catch (const ScheduleError& e) {
    EXPECT_EQ(e.violation(), ScheduleViolation::rho_out_of_range);
  }
}

TEST(Eta, Values) {
  EXPECT_EQ(eta(cfg(1, 0.67, 1, 0), 1), 1.0);
  EXPECT_EQ(eta(cfg(1, 0.9, 1, 0), 1), 1.0);
  EXPECT_NEAR(eta(cfg(1, 0.67, 1, 0), 8), 0.248273, 1e-6);
  EXPECT_NEAR(eta(cfg(1, 0.67, 1, 0), 8), std::exp(-0.67 * std::log(8.0)), 1e-15);
  EXPECT_THROW(eta(cfg(1, 0.67, 1, 0), 0), std::invalid_argument);
}

TEST(Eta, StrictlyDecreasingAndCapped) {
  const auto c = cfg(10, 0.8, 1, 0);
  for (std::size_t t = 1; t < 2000; ++t) EXPECT_GT(eta(c, t), eta(c, t + 1));
  EXPECT_EQ(step_size(c, 1), 1.0);
  EXPECT_NEAR(step_size(c, 1000), 10 * std::pow(1000.0, -0.8), 1e-15);
}

TEST(Eta, RobbinsMonroSums) {
  const auto c = cfg(1, 0.67, 1, 0);
  double s1 = 0, s2 = 0, s1_4 = 0, s2_5 = 0;
  for (std::size_t t = 1; t <= 1'000'000; ++t) {
    const double e = eta(c, t);
    s1 += e;
    s2 += e * e;
    if (t == 10'000) s1_4 = s1;
    if (t == 100'000) s2_5 = s2;
  }
  // Partial sums grow like t^0.33; the squared tail beyond 1e5 is about
  // (1e5^-0.34 - 1e6^-0.34) / 0.34.
  EXPECT_GT(s1, 4 * s1_4);
  EXPECT_NEAR(s2 - s2_5, (std::pow(1e5, -0.34) - std::pow(1e6, -0.34)) / 0.34, 1e-3);
}

TEST(Batch, Values) {
  for (std::size_t t : {1u, 7u, 1000u}) EXPECT_EQ(batch(cfg(1, 0.67, 3, 0), t), 3u);
  EXPECT_EQ(batch(cfg(1, 0.67, 2, 0.3), 100), 8u);
  EXPECT_EQ(batch(cfg(1, 0.67, 2, 0.5), 100), 20u);
  EXPECT_EQ(batch(cfg(1, 0.67, 2, 0.2), 100), 6u);
  EXPECT_EQ(batch(cfg(1, 0.67, 1, 0.5), 81), 9u);
  EXPECT_EQ(batch(cfg(1, 0.67, 1, 0.5), 82), 10u);
  EXPECT_EQ(batch(cfg(1, 0.67, 1, 0.5), 1'000'000), 1000u);
  EXPECT_THROW(batch(cfg(1, 0.67, 1, 0.5), 0), std::invalid_argument);
}

TEST(Batch, NonDecreasing) {
  for (double beta : {0.0, 0.2, 0.3, 0.5, 0.9}) {
    const auto c = cfg(1, 0.67, 2, beta);
    for (std::size_t t = 1; t < 5000; ++t) EXPECT_LE(batch(c, t), batch(c, t + 1));
  }
}

TEST(BatchInverseSum, ConstantBatches) {
  EXPECT_EQ(batch_inverse_sum(cfg(1, 0.67, 1, 0), 1234), 1234.0);
  EXPECT_NEAR(batch_inverse_sum(cfg(1, 0.67, 4, 0), 1000), 250.0, 1e-12);
}

TEST(BatchInverseSum, PartialSumRatioLimit) {
  // At T = 1e6 the ratio sits below r^(1-beta); the ceiling keeps the gap
  // near 2% for beta = 0.2 at r = 0.1, and it closes only like T^-beta.
  const std::size_t T = 1'000'000;
  for (double beta : {0.0, 0.2, 0.3, 0.5}) {
    const auto c = cfg(1, 0.67, 1, beta);
    const double full = batch_inverse_sum(c, T);
    for (double r : {0.1, 0.25, 0.5, 0.9}) {
      const auto k = static_cast<std::size_t>(std::ceil(r * T));
      const double gap = 1.0 - batch_inverse_sum(c, k) / full / std::pow(r, 1 - beta);
      EXPECT_GE(gap, -1e-12) << "beta " << beta << " r " << r;
      EXPECT_LE(gap, 0.025) << "beta " << beta << " r " << r;
      if (beta == 0.0 || beta == 0.5) EXPECT_LT(gap, 0.01) << "beta " << beta << " r " << r;
    }
  }
  const auto c = cfg(1, 0.67, 1, 0.5);
  EXPECT_NEAR(batch_inverse_sum(c, 250'000) / batch_inverse_sum(c, T), 0.5, 0.005);
}

TEST(BatchIndexMode, RoundTrip) {
  EXPECT_EQ(parse_batch_index_mode("global-step"), BatchIndexMode::global_step);
  EXPECT_EQ(parse_batch_index_mode(to_string(BatchIndexMode::within_episode_step)),
            BatchIndexMode::within_episode_step);
  EXPECT_THROW(parse_batch_index_mode("episode"), std::invalid_argument);
}
