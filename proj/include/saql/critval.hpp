#pragma once

#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

namespace saql {

/// Probability levels tabulated for every beta.
inline const std::vector<double> kCriticalLevels = {0.01, 0.025, 0.05, 0.10, 0.50, 0.90, 0.95, 0.975, 0.99};

struct CriticalValueMeta {
  std::size_t n_steps = 0;
  std::size_t n_reps = 0;
  std::uint64_t seed = 0;
  std::string command;
};

/// Quantiles of kappa_beta keyed by beta and probability level. Keys are
/// matched exactly up to 1e-9; there is no interpolation across beta.
class CriticalValueTable {
 public:
  void set(double beta, double prob, double quantile);
  /// Throws std::out_of_range listing the available betas.
  double quantile(double beta, double prob) const;
  bool contains(double beta, double prob) const;
  std::vector<double> betas() const;
  std::vector<std::pair<double, double>> row(double beta) const;

  CriticalValueMeta meta;

  nlohmann::json to_json() const;
  static CriticalValueTable from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static CriticalValueTable load(const std::string& path);

 private:
  static std::int64_t key(double x);
  std::map<std::int64_t, std::map<std::int64_t, std::pair<double, double>>> rows_;  // beta -> prob -> (prob, q)
  std::map<std::int64_t, double> beta_values_;
};

/// Monte-Carlo draws of kappa_beta = M(1) / sqrt(int_0^1 (M(r) - r M(1))^2 dr)
/// with M(k/n) = sqrt(1-beta) * sum_{i<=k} (i/n)^(-beta/2) Z_i / sqrt(n).
/// Replication r uses its own stream derived from (seed, r), so the output
/// does not depend on `threads`.
std::vector<double> simulate_kappa(double beta, std::size_t n_steps, std::size_t n_reps, std::uint64_t seed,
                                   unsigned threads = 1);

/// Type-7 empirical quantiles, h = (n-1) p.
std::map<double, double> quantiles(std::span<const double> samples, std::span<const double> probs);

/// Row for beta index i uses seed + i.
CriticalValueTable build_table(std::span<const double> betas, std::size_t n_steps, std::size_t n_reps,
                               std::uint64_t seed, unsigned threads = 1);

/// Upper alpha/2 quantile: table entry at (beta, 1 - alpha/2).
double lookup(const CriticalValueTable& table, double beta, double alpha);

/// Reference quantiles for beta in {0, 0.2, 0.3, 0.5} (1000 steps, 50000
/// replications).
CriticalValueTable reference_table();

}  // namespace saql
