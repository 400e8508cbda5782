#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saql/inference.hpp"
#include "saql/mdp.hpp"
#include "saql/schedules.hpp"
#include "saql/types.hpp"

namespace saql {

enum class RunMode { generative, episode };

/// per_draw materialises every reward and next state of a batch; aggregated
/// draws the batch's sufficient statistics directly. Both give the same law
/// for the iterates, but not the same stream for a given seed.
enum class Sampler { per_draw, aggregated };

struct RunConfig {
  ScheduleConfig schedule;
  double gamma = 0.9;
  RunMode mode = RunMode::generative;
  double epsilon = 1.0;
  std::size_t max_steps_per_episode = 100;
  /// Steps in generative mode, episodes in episode mode.
  std::size_t total = 1;
  std::uint64_t seed = 0;
  /// Sorted, in the unit of `total`.
  std::vector<std::size_t> checkpoints;
  /// When false only beta < 1 is required of the batch exponent.
  bool enforce_a2 = true;
  Sampler sampler = Sampler::per_draw;
  /// Flat indices fed to the accumulator; empty means all D entries.
  std::vector<std::size_t> tracked;
};

/// Throws std::invalid_argument (or ScheduleError) naming the bad field.
void validate(const RunConfig& cfg, std::size_t dim);

struct RunState {
  QTable q;
  std::size_t global_step = 0;
  std::size_t episode = 0;
  RSAccumulator acc{1};
};

/// Observer of a run. on_step sees the state right after the update of
/// global step `global_step` with batch size `batch`; on_checkpoint fires
/// when the step (generative) or episode (episode mode) count reaches a
/// checkpoint.
class IterateSink {
 public:
  virtual ~IterateSink() = default;
  virtual void on_step(const RunState& /*state*/, std::size_t /*batch*/) {}
  virtual void on_checkpoint(const RunState& /*state*/, std::size_t /*checkpoint*/) {}
};

/// mean(rewards) + gamma * mean_i max_a' q(s'_i, a'), terminal s' counting 0.
double empirical_bellman(const TabularMDP& mdp, const QTable& q, const BatchSample& sample, double gamma);
double empirical_bellman(const TabularMDP& mdp, const QTable& q, const BatchSummary& sample, double gamma);

/// Returns q with entry (s,a) replaced by (1 - eta_t) q(s,a) + eta_t * target.
QTable sa_q_update(const TabularMDP& mdp, const QTable& q, State s, Action a, const BatchSample& sample,
                   double eta_t, double gamma);

/// In-place form used by run(); eta_t must lie in (0,1].
void apply_update(QTable& q, State s, Action a, double target, double eta_t);

/// Runs from Q0 = 0. Generative mode draws (s,a) uniformly over non-terminal
/// pairs each step; episode mode follows epsilon-greedy rollouts from the
/// start state and resets on a terminal state or after
/// max_steps_per_episode steps. The step size is indexed by the global step
/// and the batch size by schedule.batch_index_mode. Deterministic in
/// cfg.seed.
RunState run(const TabularMDP& mdp, const RunConfig& cfg, IterateSink* sink = nullptr);

std::string to_string(RunMode mode);
RunMode parse_run_mode(const std::string& s);
std::string to_string(Sampler sampler);
Sampler parse_sampler(const std::string& s);

}  // namespace saql
