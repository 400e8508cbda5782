#include "saql/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "saql/oracle.hpp"
#include "saql/parallel.hpp"
#include "saql/stats.hpp"

namespace saql {

namespace {

class CheckpointRecorder : public IterateSink {
 public:
  CheckpointRecorder(double q_star, double crit, std::size_t n_checkpoints) : q_star_(q_star), crit_(crit) {
    cover.reserve(n_checkpoints);
    width.reserve(n_checkpoints);
    steps.reserve(n_checkpoints);
  }

  void on_checkpoint(const RunState& state, std::size_t) override {
    const auto ci = confidence_interval(state.acc, 0, crit_);
    cover.push_back(ci.lo <= q_star_ && q_star_ <= ci.hi ? 1 : 0);
    width.push_back(ci.hi - ci.lo);
    steps.push_back(static_cast<double>(state.global_step));
  }

  std::vector<int> cover;
  std::vector<double> width;
  std::vector<double> steps;

 private:
  double q_star_;
  double crit_;
};

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::vector<CoverageReport> coverage_experiment(const TabularMDP& mdp, const RunConfig& base,
                                                std::span<const Arm> arms, const CriticalValueTable& table,
                                                const QTable& q_star, const CoverageOptions& opts) {
  if (opts.entry >= mdp.dim()) throw std::invalid_argument("coverage_experiment: entry out of range");
  if (opts.n_reps < 1) throw std::invalid_argument("coverage_experiment: n_reps must be >= 1");
  if (q_star.size() != mdp.dim()) throw std::invalid_argument("coverage_experiment: Q* has the wrong size");
  const std::size_t n_cp = base.checkpoints.size();
  std::vector<CoverageReport> out;
  for (const Arm& arm : arms) {
    const double crit = lookup(table, arm.beta, opts.alpha);
    RunConfig cfg = base;
    cfg.schedule.batch0 = arm.batch0;
    cfg.schedule.beta = arm.beta;
    cfg.tracked = {opts.entry};
    validate(cfg, mdp.dim());

    std::vector<CheckpointRecorder> records(opts.n_reps, CheckpointRecorder(q_star[opts.entry], crit, n_cp));
    parallel_for(opts.n_reps, opts.threads, [&](std::size_t rep) {
      RunConfig local = cfg;
      local.seed = base.seed + rep;
      run(mdp, local, &records[rep]);
    });

    CoverageReport rep;
    rep.env_id = opts.env_id;
    rep.entry = opts.entry;
    rep.beta = arm.beta;
    rep.batch0 = arm.batch0;
    rep.checkpoints = base.checkpoints;
    rep.n_reps = opts.n_reps;
    const double n = static_cast<double>(opts.n_reps);
    for (std::size_t k = 0; k < n_cp; ++k) {
      double hits = 0.0, steps = 0.0;
      std::vector<double> widths(opts.n_reps);
      for (std::size_t r = 0; r < opts.n_reps; ++r) {
        hits += records[r].cover[k];
        widths[r] = records[r].width[k];
        steps += records[r].steps[k];
      }
      rep.coverage.push_back(hits / n);
      rep.mean_width.push_back(mean(widths));
      rep.width_se.push_back(opts.n_reps > 1 ? std::sqrt(sample_variance(widths) / n) : 0.0);
      rep.mean_steps.push_back(steps / n);
    }
    out.push_back(std::move(rep));
  }
  return out;
}

VarianceCheckReport variance_check(const TabularMDP& mdp, const RunConfig& cfg, std::size_t n_reps,
                                   unsigned threads) {
  if (cfg.mode != RunMode::generative) throw std::invalid_argument("variance_check: requires generative mode");
  if (n_reps < 2) throw std::invalid_argument("variance_check: n_reps must be >= 2");
  RunConfig base = cfg;
  base.tracked.clear();
  base.checkpoints.clear();
  validate(base, mdp.dim());

  const QTable q_star = value_iteration(mdp);
  const auto model = asymptotic_model(mdp, q_star, uniform_nonterminal_mu(mdp));

  const auto d = static_cast<Eigen::Index>(mdp.dim());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n_reps), d);
  parallel_for(n_reps, threads, [&](std::size_t rep) {
    RunConfig local = base;
    local.seed = cfg.seed + rep;
    const RunState st = run(mdp, local);
    const double scale = static_cast<double>(st.acc.count()) / st.acc.m_T();
    for (Eigen::Index j = 0; j < d; ++j) {
      x(static_cast<Eigen::Index>(rep), j) = scale * (st.acc.qbar(static_cast<std::size_t>(j)) - q_star[j]);
    }
  });

  const Eigen::RowVectorXd centre = x.colwise().mean();
  const Eigen::MatrixXd centred = x.rowwise() - centre;
  VarianceCheckReport report;
  report.empirical_cov = centred.transpose() * centred / static_cast<double>(n_reps - 1);
  report.omega = model.Omega;
  const double norm = report.omega.norm();
  if (!(norm > 0.0)) throw std::domain_error("variance_check: oracle Omega is zero");
  report.rel_frobenius_err = (report.empirical_cov - report.omega).norm() / norm;
  report.n_reps = n_reps;
  report.T = cfg.total;
  return report;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

nlohmann::json to_json(const VarianceCheckReport& report) {
  return {{"empirical_cov", matrix_json(report.empirical_cov)},
          {"omega", matrix_json(report.omega)},
          {"rel_frobenius_err", report.rel_frobenius_err},
          {"n_reps", report.n_reps},
          {"T", report.T}};
}

void write_report(std::span<const CoverageReport> reports, const nlohmann::json& config, const std::string& csv_path) {
  {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot open '" + csv_path + "' for writing");
    out << kCoverageCsvHeader << '\n';
    for (const auto& r : reports) {
      for (std::size_t k = 0; k < r.checkpoints.size(); ++k) {
        out << r.env_id << ',' << r.entry << ',' << format_double(r.beta) << ',' << r.checkpoints[k] << ','
            << format_double(r.coverage[k]) << ',' << format_double(r.mean_width[k]) << ','
            << format_double(r.width_se[k]) << ',' << r.n_reps << '\n';
      }
    }
    if (!out) throw std::runtime_error("failed writing '" + csv_path + "'");
  }

  nlohmann::json arms = nlohmann::json::array();
  for (const auto& r : reports) {
    arms.push_back({{"env", r.env_id},
                    {"entry", r.entry},
                    {"beta", r.beta},
                    {"batch0", r.batch0},
                    {"checkpoints", r.checkpoints},
                    {"coverage", r.coverage},
                    {"mean_width", r.mean_width},
                    {"width_se", r.width_se},
                    {"mean_steps", r.mean_steps},
                    {"n_reps", r.n_reps}});
  }
  const std::string json_path = std::filesystem::path(csv_path).replace_extension(".json").string();
  std::ofstream out(json_path);
  if (!out) throw std::runtime_error("cannot open '" + json_path + "' for writing");
  out << nlohmann::json{{"config", config}, {"reports", arms}}.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + json_path + "'");
}

std::vector<CoverageRow> read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kCoverageCsvHeader) {
    throw std::runtime_error("'" + path + "': unexpected header");
  }
  std::vector<CoverageRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw std::runtime_error("'" + path + "' line " + std::to_string(line_no) + ": expected 8 fields");
    try {
      rows.push_back({f[0], std::stoul(f[1]), std::stod(f[2]), std::stoul(f[3]), std::stod(f[4]), std::stod(f[5]),
                      std::stod(f[6]), std::stoul(f[7])});
    } catch (const std::logic_error&) {
      throw std::runtime_error("'" + path + "' line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return rows;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("env", c.env);
  get("sigma", c.sigma);
  get("alpha", c.alpha);
  get("n_reps", c.n_reps);
  get("entry", c.entry);
  get("critval", c.critval);
  get("threads", c.threads);

  RunConfig& r = c.run;
  get("eta0", r.schedule.eta0);
  get("rho", r.schedule.rho);
  get("batch0", r.schedule.batch0);
  get("beta", r.schedule.beta);
  get("gamma", r.gamma);
  if (j.contains("mode")) r.mode = parse_run_mode(j.at("mode").get<std::string>());
  get("epsilon", r.epsilon);
  get("max_steps_per_episode", r.max_steps_per_episode);
  get("total", r.total);
  get("seed", r.seed);
  get("checkpoints", r.checkpoints);
  get("enforce_a2", r.enforce_a2);
  if (j.contains("sampler")) r.sampler = parse_sampler(j.at("sampler").get<std::string>());
  if (j.contains("batch_index_mode")) {
    r.schedule.batch_index_mode = parse_batch_index_mode(j.at("batch_index_mode").get<std::string>());
  } else if (j.contains("mode")) {
    r.schedule.batch_index_mode =
        r.mode == RunMode::episode ? BatchIndexMode::within_episode_step : BatchIndexMode::global_step;
  }

  if (j.contains("arms")) {
    c.arms.clear();
    for (const auto& a : j.at("arms")) c.arms.push_back({a.value("batch0", r.schedule.batch0), a.at("beta").get<double>()});
  } else if (j.contains("betas")) {
    c.arms.clear();
    for (const auto& b : j.at("betas")) c.arms.push_back({r.schedule.batch0, b.get<double>()});
  }
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& a : c.arms) arms.push_back({{"batch0", a.batch0}, {"beta", a.beta}});
  const RunConfig& r = c.run;
  return {{"env", c.env},
          {"sigma", c.sigma},
          {"alpha", c.alpha},
          {"n_reps", c.n_reps},
          {"entry", c.entry},
          {"critval", c.critval},
          {"threads", c.threads},
          {"eta0", r.schedule.eta0},
          {"rho", r.schedule.rho},
          {"batch0", r.schedule.batch0},
          {"beta", r.schedule.beta},
          {"batch_index_mode", to_string(r.schedule.batch_index_mode)},
          {"gamma", r.gamma},
          {"mode", to_string(r.mode)},
          {"epsilon", r.epsilon},
          {"max_steps_per_episode", r.max_steps_per_episode},
          {"total", r.total},
          {"seed", r.seed},
          {"checkpoints", r.checkpoints},
          {"enforce_a2", r.enforce_a2},
          {"sampler", to_string(r.sampler)},
          {"checkpoint_unit", r.mode == RunMode::episode ? "episodes" : "steps"},
          {"arms", arms}};
}

std::size_t resolve_entry(const std::string& text, const TabularMDP& mdp, const QTable& q_star) {
  if (text.empty() || text == "default") {
    const State s = mdp.start_state();
    return mdp.index(s, q_star.argmax(s));
  }
  if (text.rfind("random:", 0) == 0) {
    const auto& pairs = mdp.nonterminal_pairs();
    if (pairs.empty()) throw std::invalid_argument("resolve_entry: no non-terminal pair to choose from");
    Rng rng = make_rng(std::stoull(text.substr(7)));
    return pairs[std::uniform_int_distribution<std::size_t>(0, pairs.size() - 1)(rng)];
  }
  std::size_t pos = 0;
  unsigned long long j = 0;
  try {
    j = std::stoull(text, &pos);
  } catch (const std::logic_error&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size() || j >= mdp.dim()) {
    throw std::invalid_argument("resolve_entry: bad entry '" + text + "'");
  }
  return static_cast<std::size_t>(j);
}

}  // namespace saql
