// Acceptance checks 1-7. Prints detail lines indented and one
// "criterion N: PASS|FAIL" line per check; exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "saql/critval.hpp"
#include "saql/experiments.hpp"
#include "saql/inference.hpp"
#include "saql/mdp.hpp"
#include "saql/oracle.hpp"
#include "saql/parallel.hpp"
#include "saql/qlearn.hpp"
#include "saql/schedules.hpp"
#include "saql/stats.hpp"

using namespace saql;

namespace {

const std::vector<double> kBetas = {0.0, 0.2, 0.3, 0.5};

unsigned threads() { return default_threads(); }

bool critical_values() {
  const auto ref = reference_table();
  const auto sim = build_table(kBetas, 1000, 50000, 1000, threads());
  bool ok = true;
  for (double beta : kBetas) {
    double worst_mid = 0.0, worst_tail = 0.0;
    for (double p : kCriticalLevels) {
      if (p == 0.5) continue;
      const double d = std::abs(sim.quantile(beta, p) - ref.quantile(beta, p));
      double& worst = p == 0.01 || p == 0.99 ? worst_tail : worst_mid;
      worst = std::max(worst, d);
    }
    const bool row_ok = worst_mid <= 0.15 && worst_tail <= 0.25;
    ok = ok && row_ok;
    std::printf("  beta=%.1f: q(0.975)=%.3f (reference %.3f), max |diff| %.3f inner (tol 0.15), %.3f at 1%%/99%% (tol 0.25)\n",
                beta, sim.quantile(beta, 0.975), ref.quantile(beta, 0.975), worst_mid, worst_tail);
  }
  return ok;
}

class StreamRecorder : public IterateSink {
 public:
  void on_step(const RunState& st, std::size_t b) override {
    stream.emplace_back(st.q.values().begin(), st.q.values().end());
    batches.push_back(b);
  }
  std::vector<std::vector<double>> stream;
  std::vector<std::size_t> batches;
};

std::vector<long double> two_pass_dhat(const StreamRecorder& rec) {
  const std::size_t T = rec.stream.size(), D = rec.stream[0].size();
  long double minv = 0;
  for (auto b : rec.batches) minv += 1.0L / b;
  std::vector<long double> out(D);
  for (std::size_t j = 0; j < D; ++j) {
    long double qbar = 0;
    for (const auto& q : rec.stream) qbar += q[j];
    qbar /= T;
    long double partial = 0, acc = 0;
    for (const auto& q : rec.stream) {
      partial += q[j] - qbar;
      acc += partial * partial;
    }
    out[j] = acc / (T * minv);
  }
  return out;
}

bool streaming_estimator() {
  Rng rng = make_rng(2024);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n_states = 2 + rng() % 3, n_actions = 1 + rng() % 2;
    const auto mdp = build_random_mdp(n_states, n_actions, rng(), 0.5 + 0.4 * (rng() % 100) / 100.0, 1.0);
    RunConfig cfg;
    cfg.gamma = mdp.gamma();
    cfg.total = 10 + rng() % 991;
    cfg.seed = rng();
    cfg.schedule.eta0 = 1.0 + rng() % 5;
    cfg.schedule.rho = 0.8;
    cfg.schedule.batch0 = 1 + rng() % 3;
    cfg.schedule.beta = (rng() % 6) / 10.0;
    StreamRecorder rec;
    const RunState st = run(mdp, cfg, &rec);
    const auto one = st.acc.dhat_diag();
    const auto two = two_pass_dhat(rec);
    for (std::size_t j = 0; j < one.size(); ++j) {
      const long double denom = std::max(std::abs(two[j]), 1e-300L);
      worst = std::max(worst, static_cast<double>(std::abs(one[j] - two[j]) / denom));
    }
  }
  std::printf("  50 streams (D <= 8, T <= 1000): max relative error %.3g (tol 1e-9)\n", worst);
  return worst <= 1e-9;
}

bool variance() {
  const auto mdp = make_environment("chain:0.3:0.6:1:0", 0.2, 1.0);
  bool ok = true;
  for (Arm arm : {Arm{1, 0.0}, Arm{2, 0.5}}) {
    RunConfig cfg;
    cfg.gamma = 0.2;
    cfg.total = 20000;
    cfg.schedule.eta0 = 10.0;
    cfg.schedule.rho = 0.8;
    cfg.schedule.batch0 = arm.batch0;
    cfg.schedule.beta = arm.beta;
    cfg.sampler = Sampler::aggregated;
    cfg.seed = 11;
    const auto r = variance_check(mdp, cfg, 1000, threads());
    std::printf("  B=%zu beta=%.1f: rel_frobenius_err %.4f (tol 0.15)\n", arm.batch0, arm.beta, r.rel_frobenius_err);
    ok = ok && r.rel_frobenius_err <= 0.15;
  }
  return ok;
}

bool coverage_trend() {
  const auto mdp = build_frozenlake(false, 0.9, 2.0);
  const QTable q_star = value_iteration(mdp);
  RunConfig cfg;
  cfg.gamma = 0.9;
  cfg.mode = RunMode::episode;
  cfg.epsilon = 1.0;
  cfg.total = 10000;
  cfg.checkpoints = {10000};
  cfg.schedule.eta0 = 1.0;
  cfg.schedule.rho = 0.67;
  cfg.schedule.batch_index_mode = BatchIndexMode::within_episode_step;
  cfg.enforce_a2 = false;
  cfg.sampler = Sampler::aggregated;
  cfg.seed = 1;
  const std::vector<Arm> arms{{1, 0.0}, {2, 0.2}, {2, 0.3}, {2, 0.5}};
  CoverageOptions opts;
  opts.env_id = "frozenlake";
  opts.entry = resolve_entry("default", mdp, q_star);
  opts.n_reps = 100;
  opts.threads = threads();
  const auto reports = coverage_experiment(mdp, cfg, arms, reference_table(), q_star, opts);
  bool cover_ok = true, order_ok = true;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    std::printf("  beta=%.1f B=%zu: coverage %.2f (need >= 0.90), mean width %.4f\n", r.beta, r.batch0,
                r.coverage[0], r.mean_width[0]);
    cover_ok = cover_ok && r.coverage[0] >= 0.90;
    if (i > 0) order_ok = order_ok && r.mean_width[0] < reports[i - 1].mean_width[0];
  }
  const double ratio = reports.front().mean_width[0] / reports.back().mean_width[0];
  const bool ratio_ok = ratio >= 2.0 && ratio <= 6.0;
  std::printf("  width ordering strict: %s; width(0)/width(0.5) = %.2f (band [2, 6])\n", order_ok ? "yes" : "no",
              ratio);
  return cover_ok && order_ok && ratio_ok;
}

bool convergence_and_rate() {
  bool ok = true;
  {
    const auto mdp = build_frozenlake(false, 0.9, 0.0);
    const QTable q_star = value_iteration(mdp);
    RunConfig cfg;
    cfg.gamma = 0.9;
    cfg.total = 200000;
    cfg.schedule.eta0 = static_cast<double>(mdp.nonterminal_pairs().size());
    cfg.schedule.rho = 0.67;
    cfg.sampler = Sampler::aggregated;
    cfg.tracked = {0};
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      cfg.seed = seed;
      const RunState st = run(mdp, cfg);
      for (std::size_t j = 0; j < q_star.size(); ++j) worst = std::max(worst, std::abs(st.q[j] - q_star[j]));
    }
    std::printf("  frozenlake T=2e5, eta0=%.0f, rho=0.67: max over 5 seeds of sup|Q_T - Q*| = %.2e (tol 0.05)\n",
                cfg.schedule.eta0, worst);
    ok = ok && worst < 0.05;
  }
  {
    const auto mdp = build_random_mdp(3, 2, 7, 0.5, 1.0);
    const QTable q_star = value_iteration(mdp);
    RunConfig cfg;
    cfg.gamma = 0.5;
    cfg.total = 100000;
    cfg.schedule.eta0 = static_cast<double>(mdp.nonterminal_pairs().size());
    cfg.schedule.rho = 0.67;
    cfg.sampler = Sampler::aggregated;
    cfg.tracked = {0};
    const std::size_t K = 9;
    for (std::size_t k = 0; k < K; ++k) {
      cfg.checkpoints.push_back(static_cast<std::size_t>(std::llround(1000 * std::pow(100.0, k / double(K - 1)))));
    }
    struct ErrorSink : IterateSink {
      const QTable* q_star = nullptr;
      std::vector<double> err;
      void on_checkpoint(const RunState& st, std::size_t) override {
        double e = 0.0;
        for (std::size_t j = 0; j < q_star->size(); ++j) e += std::pow(st.q[j] - (*q_star)[j], 2);
        err.push_back(e);
      }
    };
    const std::size_t n_reps = 200;
    std::vector<ErrorSink> sinks(n_reps);
    parallel_for(n_reps, threads(), [&](std::size_t rep) {
      RunConfig local = cfg;
      local.seed = 100 + rep;
      sinks[rep].q_star = &q_star;
      run(mdp, local, &sinks[rep]);
    });
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < K; ++k) {
      double m = 0.0;
      for (const auto& s : sinks) m += s.err[k] / n_reps;
      const double x = std::log(static_cast<double>(cfg.checkpoints[k])), y = std::log(m);
      sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    const double slope = (K * sxy - sx * sy) / (K * sxx - sx * sx);
    std::printf("  random 3x2 MDP, 200 reps: slope of log E|Q_t - Q*|^2 on t in [1e3,1e5] = %.3f (target -0.67 +- 0.15)\n",
                slope);
    ok = ok && std::abs(slope + 0.67) <= 0.15;
  }
  return ok;
}

bool schedule_limit() {
  const std::size_t T = 1000000;
  double worst = 0.0;
  for (double beta : kBetas) {
    ScheduleConfig cfg;
    cfg.beta = beta;
    const double full = batch_inverse_sum(cfg, T);
    for (double r : {0.1, 0.25, 0.5, 0.9}) {
      const double ratio = batch_inverse_sum(cfg, static_cast<std::size_t>(std::ceil(r * T))) / full;
      const double target = std::pow(r, 1.0 - beta);
      worst = std::max(worst, std::abs(ratio / target - 1.0));
    }
  }
  std::printf("  T=1e6, 4 betas x 4 ratios: max relative deviation from r^(1-beta) %.2e (tol 1e-2)\n", worst);
  return worst <= 0.01;
}

bool pivotal_distribution() {
  const double gamma = 0.2, reward = 0.5;
  const auto mdp = build_single_state(reward, gamma, 1.0);
  const double q_star = reward / (1.0 - gamma);
  bool ok = true;
  for (double beta : {0.0, 0.5}) {
    RunConfig cfg;
    cfg.gamma = gamma;
    cfg.total = 20000;
    cfg.schedule.eta0 = 10.0;
    cfg.schedule.rho = 0.8;
    cfg.schedule.beta = beta;
    cfg.sampler = Sampler::aggregated;
    const std::size_t n_reps = 2000;
    std::vector<double> k(n_reps);
    parallel_for(n_reps, threads(), [&](std::size_t rep) {
      RunConfig local = cfg;
      local.seed = 50000 + rep;
      k[rep] = kappa_stat(run(mdp, local).acc, q_star, 0);
    });
    const auto sim = simulate_kappa(beta, 1000, n_reps, 4242, threads());
    const auto ks = ks_two_sample(k, sim);
    std::printf("  beta=%.1f: KS statistic %.4f, p-value %.3f (need > 0.05)\n", beta, ks.statistic, ks.p_value);
    ok = ok && ks.p_value > 0.05;
  }
  return ok;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<bool()>>> checks = {
      {"critical-value reproduction", critical_values},
      {"streaming estimator vs two-pass", streaming_estimator},
      {"variance check against Omega", variance},
      {"frozenlake coverage and width trend", coverage_trend},
      {"convergence and decay rate", convergence_and_rate},
      {"schedule ratio limit", schedule_limit},
      {"pivotal statistic distribution", pivotal_distribution},
  };
  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = checks[i].second();
    } catch (const std::exception& e) {
      std::printf("  error: %s\n", e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %zu: %s  %s (%.1f s)\n", i + 1, ok ? "PASS" : "FAIL", checks[i].first, secs);
    std::fflush(stdout);
    failed += ok ? 0 : 1;
  }
  std::printf("%d of %zu criteria failed\n", failed, checks.size());
  return failed == 0 ? 0 : 1;
}
