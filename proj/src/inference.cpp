#include "saql/inference.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace saql {

namespace {

// Largest n with n(n+1)(2n+1)/6 representable in 64 bits.
constexpr std::uint64_t kMaxCount = 3'810'778;

}  // namespace

RSAccumulator::RSAccumulator(std::size_t dim)
    : shift_(dim, 0.0), sum_q_(dim), sum_a2_(dim), sum_sa_(dim) {
  if (dim == 0) throw std::invalid_argument("RSAccumulator: dimension must be >= 1");
}

void RSAccumulator::update(std::span<const double> q_t, std::size_t batch) {
  if (q_t.size() != dim()) {
    throw std::invalid_argument("RSAccumulator::update: expected " + std::to_string(dim()) +
                                " entries, got " + std::to_string(q_t.size()));
  }
  if (batch == 0) throw std::invalid_argument("RSAccumulator::update: batch must be >= 1");
  if (n_ >= kMaxCount) throw std::overflow_error("RSAccumulator: iterate count exceeds 64-bit sum of squares");
  if (n_ == 0) shift_.assign(q_t.begin(), q_t.end());
  ++n_;
  const double s = static_cast<double>(n_);
  for (std::size_t j = 0; j < q_t.size(); ++j) {
    sum_q_[j].add(q_t[j] - shift_[j]);
    const double a = sum_q_[j].value();
    sum_a2_[j].add(a * a);
    sum_sa_[j].add(s * a);
  }
  sum_s2_ += static_cast<std::uint64_t>(n_) * static_cast<std::uint64_t>(n_);
  batch_inv_sum_.add(1.0 / static_cast<double>(batch));
}

void RSAccumulator::require_nonempty(const char* what) const {
  if (n_ == 0) throw std::logic_error(std::string(what) + ": accumulator is empty");
}

double RSAccumulator::m_T() const { return std::sqrt(batch_inv_sum()); }

double RSAccumulator::qbar(std::size_t j) const {
  require_nonempty("qbar");
  return shift_[j] + sum_q_[j].value() / static_cast<double>(n_);
}

std::vector<double> RSAccumulator::qbar() const {
  require_nonempty("qbar");
  std::vector<double> out(dim());
  for (std::size_t j = 0; j < dim(); ++j) out[j] = qbar(j);
  return out;
}

double RSAccumulator::dhat(std::size_t j) const {
  require_nonempty("dhat_diag");
  const double n = static_cast<double>(n_);
  const double centered_mean = sum_q_[j].value() / n;
  const double bracket = sum_a2_[j].value() - 2.0 * centered_mean * sum_sa_[j].value() +
                         centered_mean * centered_mean * static_cast<double>(sum_s2_);
  return std::max(0.0, bracket / (n * batch_inv_sum()));
}

std::vector<double> RSAccumulator::dhat_diag() const {
  require_nonempty("dhat_diag");
  std::vector<double> out(dim());
  for (std::size_t j = 0; j < dim(); ++j) out[j] = dhat(j);
  return out;
}

nlohmann::json RSAccumulator::to_json() const {
  auto sums = [](const std::vector<CompensatedSum>& v) {
    nlohmann::json value = nlohmann::json::array(), comp = nlohmann::json::array();
    for (const auto& s : v) {
      value.push_back(s.raw_sum());
      comp.push_back(s.compensation());
    }
    return nlohmann::json{{"sum", value}, {"compensation", comp}};
  };
  return {{"n", n_},
          {"batch_inv_sum", {{"sum", batch_inv_sum_.raw_sum()}, {"compensation", batch_inv_sum_.compensation()}}},
          {"sum_s2", sum_s2_},
          {"shift", shift_},
          {"sum_q", sums(sum_q_)},
          {"sum_a2", sums(sum_a2_)},
          {"sum_sa", sums(sum_sa_)}};
}

RSAccumulator RSAccumulator::from_json(const nlohmann::json& j) {
  const auto shift = j.at("shift").get<std::vector<double>>();
  RSAccumulator acc(shift.size());
  acc.n_ = j.at("n").get<std::size_t>();
  acc.shift_ = shift;
  acc.sum_s2_ = j.at("sum_s2").get<std::uint64_t>();
  acc.batch_inv_sum_ = CompensatedSum(j.at("batch_inv_sum").at("sum").get<double>(),
                                      j.at("batch_inv_sum").at("compensation").get<double>());
  auto load = [&](const char* key, std::vector<CompensatedSum>& out) {
    const auto sum = j.at(key).at("sum").get<std::vector<double>>();
    const auto comp = j.at(key).at("compensation").get<std::vector<double>>();
    if (sum.size() != shift.size() || comp.size() != shift.size()) {
      throw std::invalid_argument(std::string("RSAccumulator snapshot: ") + key + " has wrong length");
    }
    for (std::size_t i = 0; i < sum.size(); ++i) out[i] = CompensatedSum(sum[i], comp[i]);
  };
  load("sum_q", acc.sum_q_);
  load("sum_a2", acc.sum_a2_);
  load("sum_sa", acc.sum_sa_);
  const std::uint64_t n = acc.n_;
  if (acc.sum_s2_ != n * (n + 1) * (2 * n + 1) / 6) {
    throw std::invalid_argument("RSAccumulator snapshot: sum_s2 inconsistent with n");
  }
  return acc;
}

double kappa_stat(const RSAccumulator& acc, double q_star_j, std::size_t j) {
  const double d = acc.dhat(j);
  if (!(d > 0.0)) throw std::domain_error("kappa_stat: degenerate stream (zero random-scaling variance)");
  const double t = static_cast<double>(acc.count());
  return (t / acc.m_T()) * (acc.qbar(j) - q_star_j) / std::sqrt(d);
}

ConfidenceInterval confidence_interval(const RSAccumulator& acc, std::size_t j, double crit) {
  if (!(crit > 0.0)) throw std::invalid_argument("confidence_interval: critical value must be > 0");
  const double center = acc.qbar(j);
  const double t = static_cast<double>(acc.count());
  const double half = crit * (acc.m_T() / t) * std::sqrt(acc.dhat(j));
  return {center - half, center + half, center, half};
}

FullRandomScaling::FullRandomScaling(std::size_t dim)
    : shift_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
      sum_q_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
      sum_aa_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))),
      sum_sa_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))) {
  if (dim == 0 || dim > kMaxDim) {
    throw std::invalid_argument("FullRandomScaling: dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
  }
}

void FullRandomScaling::update(std::span<const double> q_t, std::size_t batch) {
  if (static_cast<Eigen::Index>(q_t.size()) != sum_q_.size()) {
    throw std::invalid_argument("FullRandomScaling::update: dimension mismatch");
  }
  if (batch == 0) throw std::invalid_argument("FullRandomScaling::update: batch must be >= 1");
  const Eigen::Map<const Eigen::VectorXd> q(q_t.data(), static_cast<Eigen::Index>(q_t.size()));
  if (n_ == 0) shift_ = q;
  ++n_;
  const double s = static_cast<double>(n_);
  sum_q_ += q - shift_;
  sum_aa_.noalias() += sum_q_ * sum_q_.transpose();
  sum_sa_ += s * sum_q_;
  sum_s2_ += s * s;
  batch_inv_sum_.add(1.0 / static_cast<double>(batch));
}

Eigen::VectorXd FullRandomScaling::qbar() const {
  if (n_ == 0) throw std::logic_error("qbar: accumulator is empty");
  return shift_ + sum_q_ / static_cast<double>(n_);
}

Eigen::MatrixXd FullRandomScaling::dhat() const {
  if (n_ == 0) throw std::logic_error("dhat: accumulator is empty");
  const double n = static_cast<double>(n_);
  const Eigen::VectorXd c = sum_q_ / n;
  Eigen::MatrixXd m = sum_aa_ - c * sum_sa_.transpose() - sum_sa_ * c.transpose() + sum_s2_ * c * c.transpose();
  m = 0.5 * (m + m.transpose());
  return m / (n * batch_inv_sum_.value());
}

double FullRandomScaling::quadratic_form(std::span<const double> q_star) const {
  if (static_cast<Eigen::Index>(q_star.size()) != sum_q_.size()) {
    throw std::invalid_argument("quadratic_form: dimension mismatch");
  }
  const Eigen::Map<const Eigen::VectorXd> qs(q_star.data(), static_cast<Eigen::Index>(q_star.size()));
  const double n = static_cast<double>(n_);
  const Eigen::VectorXd m1 = (n / std::sqrt(batch_inv_sum_.value())) * (qbar() - qs);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(dhat());
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw std::domain_error("quadratic_form: random-scaling matrix is not positive definite");
  }
  return m1.dot(ldlt.solve(m1));
}

}  // namespace saql
