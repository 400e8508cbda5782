#include "saql/qlearn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace saql {

void validate(const RunConfig& cfg, std::size_t dim) {
  require_valid(cfg.schedule, cfg.enforce_a2);
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw std::invalid_argument("run config: gamma must lie in (0,1)");
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) throw std::invalid_argument("run config: epsilon must lie in [0,1]");
  if (cfg.total < 1) throw std::invalid_argument("run config: total must be >= 1");
  if (cfg.max_steps_per_episode < 1) throw std::invalid_argument("run config: max_steps_per_episode must be >= 1");
  if (!std::is_sorted(cfg.checkpoints.begin(), cfg.checkpoints.end())) {
    throw std::invalid_argument("run config: checkpoints must be sorted");
  }
  for (std::size_t c : cfg.checkpoints) {
    if (c < 1 || c > cfg.total) throw std::invalid_argument("run config: checkpoint " + std::to_string(c) +
                                                            " outside [1, total]");
  }
  for (std::size_t j : cfg.tracked) {
    if (j >= dim) throw std::invalid_argument("run config: tracked entry " + std::to_string(j) + " out of range");
  }
}

double empirical_bellman(const TabularMDP& mdp, const QTable& q, const BatchSample& sample, double gamma) {
  if (sample.rewards.empty() || sample.rewards.size() != sample.next_states.size()) {
    throw std::invalid_argument("empirical_bellman: batch must be nonempty with matching lengths");
  }
  double r = 0.0, v = 0.0;
  for (double x : sample.rewards) r += x;
  for (State s : sample.next_states) {
    if (!mdp.terminal(s)) v += q.max_value(s);
  }
  const double n = static_cast<double>(sample.rewards.size());
  return r / n + gamma * v / n;
}

double empirical_bellman(const TabularMDP& mdp, const QTable& q, const BatchSummary& sample, double gamma) {
  if (sample.size == 0) throw std::invalid_argument("empirical_bellman: batch must be nonempty");
  double v = 0.0;
  for (const auto& [s, count] : sample.next_state_counts) {
    if (!mdp.terminal(s)) v += static_cast<double>(count) * q.max_value(s);
  }
  return sample.reward_mean + gamma * v / static_cast<double>(sample.size);
}

void apply_update(QTable& q, State s, Action a, double target, double eta_t) {
  if (!(eta_t > 0.0 && eta_t <= 1.0)) throw std::invalid_argument("sa_q_update: eta_t must lie in (0,1]");
  q(s, a) = (1.0 - eta_t) * q(s, a) + eta_t * target;
}

QTable sa_q_update(const TabularMDP& mdp, const QTable& q, State s, Action a, const BatchSample& sample,
                   double eta_t, double gamma) {
  QTable out = q;
  apply_update(out, s, a, empirical_bellman(mdp, q, sample, gamma), eta_t);
  return out;
}

namespace {

class Runner {
 public:
  Runner(const TabularMDP& mdp, const RunConfig& cfg, IterateSink* sink)
      : mdp_(mdp), cfg_(cfg), sink_(sink), rng_(make_rng(cfg.seed)) {
    state_.q = QTable(mdp.n_states(), mdp.n_actions());
    state_.acc = RSAccumulator(cfg.tracked.empty() ? mdp.dim() : cfg.tracked.size());
    if (!cfg.tracked.empty()) buffer_.resize(cfg.tracked.size());
  }

  RunState finish() { return std::move(state_); }

  void step(State s, Action a, std::size_t batch_index) {
    const std::size_t t = ++state_.global_step;
    const std::size_t b = batch(cfg_.schedule, batch_index);
    double target;
    if (cfg_.sampler == Sampler::aggregated) {
      target = empirical_bellman(mdp_, state_.q, sample_batch_summary(mdp_, s, a, b, rng_), cfg_.gamma);
    } else {
      target = empirical_bellman(mdp_, state_.q, sample_batch(mdp_, s, a, b, rng_), cfg_.gamma);
    }
    apply_update(state_.q, s, a, target, step_size(cfg_.schedule, t));
    if (cfg_.tracked.empty()) {
      state_.acc.update(state_.q.values(), b);
    } else {
      for (std::size_t k = 0; k < cfg_.tracked.size(); ++k) buffer_[k] = state_.q[cfg_.tracked[k]];
      state_.acc.update(buffer_, b);
    }
    if (sink_) sink_->on_step(state_, b);
  }

  void checkpoint(std::size_t count) {
    while (next_checkpoint_ < cfg_.checkpoints.size() && cfg_.checkpoints[next_checkpoint_] == count) {
      if (sink_) sink_->on_checkpoint(state_, count);
      ++next_checkpoint_;
    }
  }

  void generative() {
    const auto& pairs = mdp_.nonterminal_pairs();
    if (pairs.empty()) throw std::invalid_argument("run: MDP has no non-terminal state-action pair");
    std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
    const std::size_t na = mdp_.n_actions();
    for (std::size_t t = 1; t <= cfg_.total; ++t) {
      const std::size_t j = pairs.size() == 1 ? pairs[0] : pairs[pick(rng_)];
      step(j / na, j % na, t);
      checkpoint(t);
    }
  }

  void episodes() {
    if (mdp_.terminal(mdp_.start_state())) throw std::invalid_argument("run: start state is terminal");
    const bool within = cfg_.schedule.batch_index_mode == BatchIndexMode::within_episode_step;
    for (std::size_t e = 1; e <= cfg_.total; ++e) {
      State s = mdp_.start_state();
      for (std::size_t k = 1; k <= cfg_.max_steps_per_episode; ++k) {
        const Action a = select_action(state_.q, s, cfg_.epsilon, rng_);
        step(s, a, within ? k : state_.global_step + 1);
        s = sample_next_state(mdp_, s, a, rng_);
        if (mdp_.terminal(s)) break;
      }
      state_.episode = e;
      checkpoint(e);
    }
  }

 private:
  const TabularMDP& mdp_;
  const RunConfig& cfg_;
  IterateSink* sink_;
  Rng rng_;
  RunState state_;
  std::vector<double> buffer_;
  std::size_t next_checkpoint_ = 0;
};

}  // namespace

RunState run(const TabularMDP& mdp, const RunConfig& cfg, IterateSink* sink) {
  validate(cfg, mdp.dim());
  if (std::abs(cfg.gamma - mdp.gamma()) > 1e-15) {
    throw std::invalid_argument("run: config gamma differs from the MDP discount");
  }
  Runner runner(mdp, cfg, sink);
  if (cfg.mode == RunMode::generative) {
    runner.generative();
  } else {
    runner.episodes();
  }
  return runner.finish();
}

std::string to_string(RunMode mode) { return mode == RunMode::generative ? "generative" : "episode"; }

RunMode parse_run_mode(const std::string& s) {
  if (s == "generative") return RunMode::generative;
  if (s == "episode") return RunMode::episode;
  throw std::invalid_argument("unknown run mode '" + s + "' (expected generative or episode)");
}

std::string to_string(Sampler sampler) { return sampler == Sampler::per_draw ? "per-draw" : "aggregated"; }

Sampler parse_sampler(const std::string& s) {
  if (s == "per-draw") return Sampler::per_draw;
  if (s == "aggregated") return Sampler::aggregated;
  throw std::invalid_argument("unknown sampler '" + s + "' (expected per-draw or aggregated)");
}

}  // namespace saql
