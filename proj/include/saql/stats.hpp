#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace saql {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  CompensatedSum() = default;
  CompensatedSum(double sum, double comp) : sum_(sum), comp_(comp) {}

  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  double value() const { return sum_ + comp_; }
  double raw_sum() const { return sum_; }
  double compensation() const { return comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct KsResult {
  double statistic;  // sup |F_a - F_b|
  double p_value;    // asymptotic Kolmogorov tail
};

/// Tail of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_tail(double lambda);

/// Two-sample Kolmogorov-Smirnov test. Inputs need not be sorted.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> x);

/// Unbiased sample variance; 0 for fewer than two points.
double sample_variance(std::span<const double> x);

}  // namespace saql
