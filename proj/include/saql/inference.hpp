#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "saql/stats.hpp"

namespace saql {

struct ConfidenceInterval {
  double lo;
  double hi;
  double center;
  double halfwidth;
};

/// One-pass random-scaling state over a stream of D-dimensional iterates.
///
/// With partial sums a_s = sum_{t<=s} Q_t, the diagonal of the random
/// scaling matrix is
///
///   D_jj = 1 / (T m_T^2) * sum_s (a_s,j - s * Qbar_j)^2
///        = 1 / (T m_T^2) * [sum_s a_s,j^2 - 2 Qbar_j sum_s s a_s,j + Qbar_j^2 sum_s s^2]
///
/// with m_T^2 = sum_t 1/B_t, so four running sums suffice. The iterates are
/// stored relative to the first one; D is invariant to that shift and the
/// cancellation in the bracket shrinks accordingly.
class RSAccumulator {
 public:
  explicit RSAccumulator(std::size_t dim);

  void update(std::span<const double> q_t, std::size_t batch);

  std::size_t dim() const { return shift_.size(); }
  std::size_t count() const { return n_; }
  double batch_inv_sum() const { return batch_inv_sum_.value(); }
  /// m_T = sqrt(sum_t 1/B_t).
  double m_T() const;
  /// Exact sum_{s<=n} s^2.
  std::uint64_t sum_s2() const { return sum_s2_; }

  std::vector<double> qbar() const;
  double qbar(std::size_t j) const;

  /// Diagonal of the random scaling matrix, floored at 0. Zero after a
  /// single update; throws on an empty accumulator.
  std::vector<double> dhat_diag() const;
  double dhat(std::size_t j) const;

  nlohmann::json to_json() const;
  static RSAccumulator from_json(const nlohmann::json& j);

 private:
  void require_nonempty(const char* what) const;

  std::size_t n_ = 0;
  std::vector<double> shift_;
  std::vector<CompensatedSum> sum_q_;
  std::vector<CompensatedSum> sum_a2_;
  std::vector<CompensatedSum> sum_sa_;
  std::uint64_t sum_s2_ = 0;
  CompensatedSum batch_inv_sum_;
};

/// (T / m_T) * (Qbar_j - q_star_j) / sqrt(D_jj). Throws when D_jj is 0.
double kappa_stat(const RSAccumulator& acc, double q_star_j, std::size_t j);

/// Qbar_j +/- crit * (m_T / T) * sqrt(D_jj).
ConfidenceInterval confidence_interval(const RSAccumulator& acc, std::size_t j, double crit);

/// Full random-scaling matrix, for the joint quadratic-form statistic.
/// Memory is O(D^2), so the dimension is capped at kMaxDim.
class FullRandomScaling {
 public:
  static constexpr std::size_t kMaxDim = 64;

  explicit FullRandomScaling(std::size_t dim);

  void update(std::span<const double> q_t, std::size_t batch);

  std::size_t count() const { return n_; }
  Eigen::VectorXd qbar() const;
  Eigen::MatrixXd dhat() const;

  /// M(1) D^-1 M(1)^T with M(1) = (T / m_T)(Qbar - q_star).
  double quadratic_form(std::span<const double> q_star) const;

 private:
  std::size_t n_ = 0;
  Eigen::VectorXd shift_;
  Eigen::VectorXd sum_q_;
  Eigen::MatrixXd sum_aa_;
  Eigen::VectorXd sum_sa_;
  double sum_s2_ = 0.0;
  CompensatedSum batch_inv_sum_;
};

}  // namespace saql
