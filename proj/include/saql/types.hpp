#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace saql {

using State = std::size_t;
using Action = std::size_t;
using Rng = std::mt19937_64;

/// Builds an engine from a base seed and a stream index. Distinct
/// (seed, stream) pairs give decorrelated engines through std::seed_seq.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

/// Dense Q-values over D = n_states * n_actions entries, flat index
/// j = s * n_actions + a.
class QTable {
 public:
  QTable() = default;
  QTable(std::size_t n_states, std::size_t n_actions, double fill = 0.0)
      : n_states_(n_states), n_actions_(n_actions), values_(n_states * n_actions, fill) {}
  QTable(std::size_t n_states, std::size_t n_actions, std::vector<double> values)
      : n_states_(n_states), n_actions_(n_actions), values_(std::move(values)) {
    if (values_.size() != n_states_ * n_actions_) {
      throw std::invalid_argument("QTable: expected " + std::to_string(n_states_ * n_actions_) +
                                  " values, got " + std::to_string(values_.size()));
    }
  }

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t size() const { return values_.size(); }
  std::size_t index(State s, Action a) const { return s * n_actions_ + a; }

  double operator()(State s, Action a) const { return values_[index(s, a)]; }
  double& operator()(State s, Action a) { return values_[index(s, a)]; }
  double operator[](std::size_t j) const { return values_[j]; }
  double& operator[](std::size_t j) { return values_[j]; }

  std::span<const double> row(State s) const {
    return {values_.data() + s * n_actions_, n_actions_};
  }
  std::span<const double> values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

  double max_value(State s) const {
    auto r = row(s);
    double best = r[0];
    for (double v : r) best = v > best ? v : best;
    return best;
  }

  /// argmax over actions, lowest index wins ties.
  Action argmax(State s) const {
    auto r = row(s);
    Action best = 0;
    for (Action a = 1; a < r.size(); ++a) {
      if (r[a] > r[best]) best = a;
    }
    return best;
  }

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> values_;
};

using Policy = std::vector<Action>;

}  // namespace saql
