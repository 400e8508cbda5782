#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saql/types.hpp"

namespace saql {

/// Exact finite MDP with additive Gaussian reward noise.
///
/// The constructor checks the model invariants: every transition row is a
/// distribution (within 1e-12), terminal states self-loop with probability 1
/// and zero mean reward, gamma lies in (0,1), and noise_sigma >= 0. The object
/// is immutable afterwards.
class TabularMDP {
 public:
  struct Successor {
    State state;
    double prob;
  };

  TabularMDP(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
             std::vector<double> mean_reward, std::vector<bool> terminal, double gamma,
             double noise_sigma, State start_state);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t dim() const { return n_states_ * n_actions_; }
  std::size_t index(State s, Action a) const { return s * n_actions_ + a; }

  double transition(State s, Action a, State next) const {
    return transition_[(index(s, a)) * n_states_ + next];
  }
  double mean_reward(State s, Action a) const { return mean_reward_[index(s, a)]; }
  bool terminal(State s) const { return terminal_[s]; }
  double gamma() const { return gamma_; }
  double noise_sigma() const { return noise_sigma_; }
  State start_state() const { return start_state_; }

  /// Nonzero entries of P[s][a][.] in increasing state order.
  const std::vector<Successor>& successors(State s, Action a) const {
    return successors_[index(s, a)];
  }

  /// Flat indices j = (s,a) over non-terminal states.
  const std::vector<std::size_t>& nonterminal_pairs() const { return nonterminal_pairs_; }

  TabularMDP with_gamma(double gamma) const;
  TabularMDP with_noise(double noise_sigma) const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<double> transition_;
  std::vector<double> mean_reward_;
  std::vector<bool> terminal_;
  double gamma_;
  double noise_sigma_;
  State start_state_;
  std::vector<std::vector<Successor>> successors_;
  std::vector<double> cumulative_;  // per (s,a), aligned with successors_
  std::vector<std::size_t> cumulative_offset_;
  std::vector<std::size_t> nonterminal_pairs_;

  friend State sample_next_state(const TabularMDP&, State, Action, Rng&);
};

struct BatchSample {
  std::vector<double> rewards;
  std::vector<State> next_states;
};

/// Sufficient statistics of a batch: the reward mean and the number of
/// draws landing on each successor. Equal in law to summarising a
/// BatchSample of the same size.
struct BatchSummary {
  std::size_t size = 0;
  double reward_mean = 0.0;
  std::vector<std::pair<State, std::size_t>> next_state_counts;
};

namespace cliff {
inline constexpr std::size_t rows = 4;
inline constexpr std::size_t cols = 12;
inline constexpr Action up = 0, right = 1, down = 2, left = 3;
inline constexpr State cell(std::size_t r, std::size_t c) { return r * cols + c; }
}  // namespace cliff

namespace frozen {
inline constexpr std::size_t side = 4;
inline constexpr Action left = 0, down = 1, right = 2, up = 3;
inline constexpr State cell(std::size_t r, std::size_t c) { return r * side + c; }
}  // namespace frozen

/// 4x12 cliff: start (3,0), goal (3,11), cliff cells (3,1)..(3,10).
TabularMDP build_cliffwalking(double gamma = 0.9, double noise_sigma = 0.0);

/// Canonical 4x4 map SFFF/FHFH/FFFH/HFFG. Slippery moves go in the intended
/// direction or either perpendicular one, each with probability 1/3.
TabularMDP build_frozenlake(bool slippery, double gamma = 0.9, double noise_sigma = 0.0);

/// Random dense MDP with Dirichlet(1) transition rows, mean rewards in
/// [0,1] and no terminal states. Deterministic in the seed.
TabularMDP build_random_mdp(std::size_t n_states, std::size_t n_actions, std::uint64_t seed,
                            double gamma = 0.9, double noise_sigma = 0.0);

/// One state, one action, reward r: Q* = r / (1 - gamma).
TabularMDP build_single_state(double reward, double gamma, double noise_sigma);

/// Two states, one action. State 0 moves to 1 with probability p, state 1
/// moves to 0 with probability q.
TabularMDP build_two_state_chain(double p, double q, double reward0, double reward1, double gamma,
                                 double noise_sigma);

/// Resolves "cliffwalking", "frozenlake", "frozenlake-slippery",
/// "random:<nS>x<nA>:<seed>", "single:<reward>" and
/// "chain:<p>:<q>:<r0>:<r1>".
TabularMDP make_environment(const std::string& id, double gamma, double noise_sigma);

State sample_next_state(const TabularMDP& mdp, State s, Action a, Rng& rng);

BatchSample sample_batch(const TabularMDP& mdp, State s, Action a, std::size_t batch, Rng& rng);

/// Draws the summary directly: one Gaussian for the reward mean and a
/// multinomial split of the batch over successors.
BatchSummary sample_batch_summary(const TabularMDP& mdp, State s, Action a, std::size_t batch,
                                  Rng& rng);

/// Epsilon-greedy with lowest-index tie-breaking.
Action select_action(const QTable& q, State s, double epsilon, Rng& rng);

}  // namespace saql
