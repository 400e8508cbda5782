#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "saql/critval.hpp"
#include "saql/mdp.hpp"
#include "saql/qlearn.hpp"

namespace saql {

/// One batch schedule compared in a coverage study.
struct Arm {
  std::size_t batch0 = 1;
  double beta = 0.0;
};

struct CoverageReport {
  std::string env_id;
  std::size_t entry = 0;
  double beta = 0.0;
  std::size_t batch0 = 1;
  std::vector<std::size_t> checkpoints;
  std::vector<double> coverage;
  std::vector<double> mean_width;
  std::vector<double> width_se;
  /// Mean global step count at each checkpoint (equals the checkpoint in
  /// generative mode).
  std::vector<double> mean_steps;
  std::size_t n_reps = 0;
};

struct CoverageOptions {
  std::string env_id;
  std::size_t entry = 0;
  double alpha = 0.05;
  std::size_t n_reps = 100;
  unsigned threads = 1;
};

/// Replication r of every arm runs with seed base.seed + r. Each arm uses
/// base with its own batch0 and beta; the confidence level comes from
/// lookup(table, beta, alpha).
std::vector<CoverageReport> coverage_experiment(const TabularMDP& mdp, const RunConfig& base,
                                                std::span<const Arm> arms, const CriticalValueTable& table,
                                                const QTable& q_star, const CoverageOptions& opts);

struct VarianceCheckReport {
  Eigen::MatrixXd empirical_cov;
  Eigen::MatrixXd omega;
  double rel_frobenius_err = 0.0;
  std::size_t n_reps = 0;
  std::size_t T = 0;
};

/// Sample covariance over replications of (T / m_T)(Qbar_T - Q*) against the
/// oracle Omega for uniform sampling of non-terminal pairs. Requires
/// generative mode.
VarianceCheckReport variance_check(const TabularMDP& mdp, const RunConfig& cfg, std::size_t n_reps,
                                   unsigned threads = 1);

nlohmann::json to_json(const VarianceCheckReport& report);

inline const std::string kCoverageCsvHeader = "env,entry,beta,checkpoint,coverage,mean_width,width_se,n_reps";

struct CoverageRow {
  std::string env;
  std::size_t entry = 0;
  double beta = 0.0;
  std::size_t checkpoint = 0;
  double coverage = 0.0;
  double mean_width = 0.0;
  double width_se = 0.0;
  std::size_t n_reps = 0;
};

/// Writes `csv_path` with one row per (report, checkpoint) and a JSON
/// mirror next to it (extension replaced by .json) that also embeds
/// `config`. Throws std::runtime_error naming the path on I/O failure.
void write_report(std::span<const CoverageReport> reports, const nlohmann::json& config, const std::string& csv_path);

std::vector<CoverageRow> read_report_csv(const std::string& path);

/// Everything an experiment subcommand needs, loadable from JSON.
struct ExperimentConfig {
  std::string env = "frozenlake";
  double sigma = 0.0;
  RunConfig run;
  std::vector<Arm> arms;
  double alpha = 0.05;
  std::size_t n_reps = 100;
  /// "default" (start state, greedy optimal action), "random:<seed>" or a
  /// flat index.
  std::string entry = "default";
  std::string critval;
  unsigned threads = 1;
};

/// Reads the keys present in `j` over `defaults`. Schedule keys (eta0, rho,
/// batch0, beta, batch_index_mode) and run keys sit at the top level. If
/// batch_index_mode is absent it follows the mode: within-episode-step for
/// episode runs, global-step otherwise.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig defaults = {});
nlohmann::json to_json(const ExperimentConfig& cfg);

std::size_t resolve_entry(const std::string& text, const TabularMDP& mdp, const QTable& q_star);

}  // namespace saql
