#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "saql/critval.hpp"
#include "saql/experiments.hpp"
#include "saql/inference.hpp"
#include "saql/mdp.hpp"
#include "saql/oracle.hpp"
#include "saql/qlearn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace saql;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed config '" + path + "': " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::string joined_argv(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

/// Flags shared by the experiment subcommands. Values given on the command
/// line override the config file.
struct ExperimentFlags {
  std::string config;
  std::string out = ".";
  std::string env, entry, critval, mode, batch_index_mode, sampler;
  double sigma = 0, gamma = 0, eta0 = 0, rho = 0, beta = 0, epsilon = 0, alpha = 0;
  std::size_t batch0 = 0, total = 0, n_reps = 0, max_steps = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool relaxed = false;
  std::vector<std::size_t> checkpoints;
  std::vector<double> betas;

  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* app, bool with_arms) {
    app->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output directory");
    opts["env"] = app->add_option("--env", env, "Environment id");
    opts["sigma"] = app->add_option("--sigma", sigma, "Reward noise std. dev.");
    opts["gamma"] = app->add_option("--gamma", gamma, "Discount factor");
    opts["eta0"] = app->add_option("--eta0", eta0, "Step-size scale");
    opts["rho"] = app->add_option("--rho", rho, "Step-size exponent");
    opts["batch0"] = app->add_option("--batch0", batch0, "Batch scale B");
    opts["beta"] = app->add_option("--beta", beta, "Batch exponent");
    opts["batch_index_mode"] =
        app->add_option("--batch-index-mode", batch_index_mode, "global-step or within-episode-step");
    opts["mode"] = app->add_option("--mode", mode, "generative or episode");
    opts["epsilon"] = app->add_option("--epsilon", epsilon, "Exploration rate (episode mode)");
    opts["max_steps_per_episode"] = app->add_option("--max-steps", max_steps, "Steps per episode cap");
    opts["total"] = app->add_option("--total", total, "Total steps (generative) or episodes (episode)");
    opts["checkpoints"] = app->add_option("--checkpoints", checkpoints, "Checkpoint list")->delimiter(',');
    opts["sampler"] = app->add_option("--sampler", sampler, "per-draw or aggregated");
    opts["seed"] = app->add_option("--seed", seed, "Base seed")->required();
    opts["threads"] = app->add_option("--threads", threads, "Worker threads (0 = all cores)");
    opts["n_reps"] = app->add_option("--n-reps", n_reps, "Replications");
    opts["enforce_a2"] = app->add_flag("--relaxed", relaxed, "Only require beta < 1 of the batch exponent");
    if (with_arms) {
      opts["betas"] = app->add_option("--betas", betas, "Batch exponents to compare")->delimiter(',');
      opts["alpha"] = app->add_option("--alpha", alpha, "Miscoverage level");
      opts["entry"] = app->add_option("--entry", entry, "default, random:<seed> or a flat index");
      opts["critval"] = app->add_option("--critval", critval, "Critical value table JSON");
    }
  }

  ExperimentConfig resolve() const {
    json file = config.empty() ? json::object() : read_json_file(config);
    json over = json::object();
    auto set = [&](const char* key, const json& value) {
      auto it = opts.find(key);
      if (it != opts.end() && it->second->count() > 0) over[key] = value;
    };
    set("env", env);
    set("sigma", sigma);
    set("gamma", gamma);
    set("eta0", eta0);
    set("rho", rho);
    set("batch0", batch0);
    set("beta", beta);
    set("batch_index_mode", batch_index_mode);
    set("mode", mode);
    set("epsilon", epsilon);
    set("max_steps_per_episode", max_steps);
    set("total", total);
    set("checkpoints", checkpoints);
    set("sampler", sampler);
    set("seed", seed);
    set("threads", threads);
    set("n_reps", n_reps);
    set("enforce_a2", !relaxed);
    set("betas", betas);
    set("alpha", alpha);
    set("entry", entry);
    set("critval", critval);
    if (over.contains("betas")) file.erase("arms");
    file.merge_patch(over);
    if (over.contains("batch0") && file.contains("arms")) {
      for (auto& a : file["arms"]) a["batch0"] = over["batch0"];
    }
    return experiment_config_from_json(file);
  }
};

TabularMDP make_mdp(const ExperimentConfig& c) { return make_environment(c.env, c.run.gamma, c.sigma); }

CriticalValueTable load_table(const ExperimentConfig& c) {
  return c.critval.empty() ? reference_table() : CriticalValueTable::load(c.critval);
}

int cmd_critval(const std::vector<double>& betas, std::size_t steps, std::size_t reps, std::uint64_t seed,
                unsigned threads, const std::string& out, const std::string& samples_csv, const std::string& cmd) {
  auto table = build_table(betas, steps, reps, seed, threads);
  table.meta.command = cmd;
  table.save(out);
  if (!samples_csv.empty()) {
    std::ostringstream os;
    os << "beta,rep,kappa\n";
    for (std::size_t i = 0; i < betas.size(); ++i) {
      const auto samples = simulate_kappa(betas[i], steps, reps, seed + i, threads);
      for (std::size_t r = 0; r < samples.size(); ++r) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g\n", betas[i], r, samples[r]);
        os << buf;
      }
    }
    write_text(samples_csv, os.str());
  }
  for (double b : betas) {
    std::printf("beta=%g", b);
    for (const auto& [p, q] : table.row(b)) std::printf("  %g:%.3f", p, q);
    std::printf("\n");
  }
  return 0;
}

int cmd_oracle(const ExperimentConfig& c, const std::string& out) {
  const TabularMDP mdp = make_mdp(c);
  const QTable q_star = value_iteration(mdp);
  const Policy pi = greedy_policy(q_star);
  const A1Report a1 = check_assumption_A1(mdp, pi);
  json j = {{"env", c.env},
            {"gamma", c.run.gamma},
            {"sigma", c.sigma},
            {"n_states", mdp.n_states()},
            {"n_actions", mdp.n_actions()},
            {"q_star", std::vector<double>(q_star.values().begin(), q_star.values().end())},
            {"policy", pi},
            {"bellman_residual", bellman_residual(mdp, q_star)},
            {"assumption_a1",
             {{"reward_bounded", a1.reward_bounded}, {"spectral_ok", a1.spectral_ok}, {"rho_est", a1.rho_est}}}};
  if (mdp.dim() <= 64) {
    const auto model = asymptotic_model(mdp, q_star, uniform_nonterminal_mu(mdp));
    j["G"] = matrix_json(model.G);
    j["Sigma"] = matrix_json(model.Sigma);
    j["Omega"] = matrix_json(model.Omega);
    try {
      j["Omega_full_update"] = matrix_json(compute_Omega(model.G, model.Sigma));
    } catch (const SingularMatrixError&) {
      j["Omega_full_update"] = nullptr;
    }
  }
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  return 0;
}

class RunRecorder : public IterateSink {
 public:
  RunRecorder(std::vector<std::size_t> entries, double crit) : entries_(std::move(entries)), crit_(crit) {}
  void on_checkpoint(const RunState& st, std::size_t cp) override {
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      const auto ci = confidence_interval(st.acc, k, crit_);
      char buf[160];
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", cp, entries_[k], ci.center, ci.lo, ci.hi,
                    ci.hi - ci.lo);
      rows += buf;
    }
  }
  std::string rows = "checkpoint,entry,qbar,ci_lo,ci_hi,width\n";

 private:
  std::vector<std::size_t> entries_;
  double crit_;
};

int cmd_run(ExperimentConfig c, const std::string& out_dir, const std::vector<std::string>& entry_ids) {
  const TabularMDP mdp = make_mdp(c);
  const QTable q_star = value_iteration(mdp);
  std::vector<std::size_t> entries;
  if (entry_ids.empty()) entries.push_back(resolve_entry(c.entry, mdp, q_star));
  for (const auto& e : entry_ids) entries.push_back(resolve_entry(e, mdp, q_star));
  if (c.run.checkpoints.empty()) c.run.checkpoints = {c.run.total};
  c.run.tracked = entries;
  const double crit = lookup(load_table(c), c.run.schedule.beta, c.alpha);
  RunRecorder rec(entries, crit);
  const RunState st = run(mdp, c.run, &rec);
  fs::create_directories(out_dir);
  write_text((fs::path(out_dir) / "run.csv").string(), rec.rows);
  json j = {{"config", to_json(c)},
            {"entries", entries},
            {"critical_value", crit},
            {"global_steps", st.global_step},
            {"episodes", st.episode},
            {"accumulator", st.acc.to_json()}};
  write_text((fs::path(out_dir) / "run.json").string(), j.dump(2) + "\n");
  std::cout << rec.rows;
  return 0;
}

int cmd_coverage(ExperimentConfig c, const std::string& out_dir) {
  const TabularMDP mdp = make_mdp(c);
  const QTable q_star = value_iteration(mdp);
  if (c.arms.empty()) c.arms.push_back({c.run.schedule.batch0, c.run.schedule.beta});
  for (std::size_t i = 0; i < c.arms.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (c.arms[i].beta == c.arms[k].beta) {
        throw std::invalid_argument("coverage: arms share beta=" + std::to_string(c.arms[i].beta) +
                                    "; the CSV is keyed by beta, run them separately");
      }
    }
  }
  if (c.run.checkpoints.empty()) c.run.checkpoints = {c.run.total};
  CoverageOptions opts;
  opts.env_id = c.env;
  opts.entry = resolve_entry(c.entry, mdp, q_star);
  opts.alpha = c.alpha;
  opts.n_reps = c.n_reps;
  opts.threads = c.threads;
  const auto reports = coverage_experiment(mdp, c.run, c.arms, load_table(c), q_star, opts);
  fs::create_directories(out_dir);
  write_report(reports, to_json(c), (fs::path(out_dir) / "coverage.csv").string());
  for (const auto& r : reports) {
    std::printf("beta=%g B=%zu: coverage=%.3f mean_width=%.6g (se %.2g) at checkpoint %zu\n", r.beta, r.batch0,
                r.coverage.back(), r.mean_width.back(), r.width_se.back(), r.checkpoints.back());
  }
  return 0;
}

int cmd_variance(const ExperimentConfig& c, const std::string& out_dir) {
  const TabularMDP mdp = make_mdp(c);
  const auto report = variance_check(mdp, c.run, c.n_reps, c.threads);
  fs::create_directories(out_dir);
  json j = to_json(report);
  j["config"] = to_json(c);
  write_text((fs::path(out_dir) / "variance.json").string(), j.dump(2) + "\n");
  std::printf("rel_frobenius_err=%.4f (T=%zu, n_reps=%zu)\n", report.rel_frobenius_err, report.T, report.n_reps);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sample-averaged Q-learning with random-scaling inference"};
  app.require_subcommand(1);

  auto* critval = app.add_subcommand("critval", "Simulate the kappa_beta quantile table");
  std::vector<double> cv_betas = {0.0, 0.2, 0.3, 0.5};
  std::size_t cv_steps = 1000, cv_reps = 50000;
  std::uint64_t cv_seed = 1000;
  unsigned cv_threads = 1;
  std::string cv_out = "critical_values.json", cv_samples;
  critval->add_option("--betas", cv_betas, "Comma-separated betas")->delimiter(',');
  critval->add_option("--steps", cv_steps, "Grid points per path");
  critval->add_option("--reps", cv_reps, "Replications per beta");
  critval->add_option("--seed", cv_seed, "Base seed (beta i uses seed + i)");
  critval->add_option("--threads", cv_threads, "Worker threads (0 = all cores)");
  critval->add_option("--out", cv_out, "Output JSON path");
  critval->add_option("--samples-csv", cv_samples, "Also dump raw kappa samples as CSV");

  auto* oracle = app.add_subcommand("oracle", "Exact Q*, assumption report and asymptotic covariance");
  std::string or_config, or_env = "frozenlake", or_out;
  double or_gamma = 0.9, or_sigma = 0.0;
  auto* or_env_opt = oracle->add_option("--env", or_env, "Environment id");
  auto* or_gamma_opt = oracle->add_option("--gamma", or_gamma, "Discount factor");
  auto* or_sigma_opt = oracle->add_option("--sigma", or_sigma, "Reward noise std. dev.");
  oracle->add_option("--config", or_config, "JSON config file")->check(CLI::ExistingFile);
  oracle->add_option("--out", or_out, "Output JSON path (default stdout)");

  auto* run_cmd = app.add_subcommand("run", "One run with checkpointed confidence intervals");
  ExperimentFlags run_flags;
  run_flags.attach(run_cmd, true);
  std::vector<std::string> run_entries;
  run_cmd->add_option("--track", run_entries, "Entries to report (default: the config entry)")->delimiter(',');

  auto* coverage = app.add_subcommand("coverage", "Coverage and width study over batch schedules");
  ExperimentFlags cov_flags;
  cov_flags.attach(coverage, true);

  auto* variance = app.add_subcommand("variance-check", "Empirical covariance of the averaged iterate vs Omega");
  ExperimentFlags var_flags;
  var_flags.attach(variance, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (critval->parsed()) {
      return cmd_critval(cv_betas, cv_steps, cv_reps, cv_seed, cv_threads, cv_out, cv_samples, joined_argv(argc, argv));
    }
    if (oracle->parsed()) {
      ExperimentConfig c;
      c.env = or_env;
      c.run.gamma = or_gamma;
      if (!or_config.empty()) c = experiment_config_from_json(read_json_file(or_config), c);
      if (or_env_opt->count()) c.env = or_env;
      if (or_gamma_opt->count()) c.run.gamma = or_gamma;
      if (or_sigma_opt->count()) c.sigma = or_sigma;
      return cmd_oracle(c, or_out);
    }
    if (run_cmd->parsed()) return cmd_run(run_flags.resolve(), run_flags.out, run_entries);
    if (coverage->parsed()) return cmd_coverage(cov_flags.resolve(), cov_flags.out);
    if (variance->parsed()) return cmd_variance(var_flags.resolve(), var_flags.out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
