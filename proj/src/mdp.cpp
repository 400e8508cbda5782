#include "saql/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace saql {

TabularMDP::TabularMDP(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
                       std::vector<double> mean_reward, std::vector<bool> terminal, double gamma,
                       double noise_sigma, State start_state)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      mean_reward_(std::move(mean_reward)),
      terminal_(std::move(terminal)),
      gamma_(gamma),
      noise_sigma_(noise_sigma),
      start_state_(start_state) {
  if (n_states_ == 0 || n_actions_ == 0) throw std::invalid_argument("TabularMDP: empty model");
  const std::size_t d = n_states_ * n_actions_;
  if (transition_.size() != d * n_states_) {
    throw std::invalid_argument("TabularMDP: transition tensor has wrong size");
  }
  if (mean_reward_.size() != d) throw std::invalid_argument("TabularMDP: reward matrix has wrong size");
  if (terminal_.size() != n_states_) throw std::invalid_argument("TabularMDP: terminal mask has wrong size");
  if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw std::invalid_argument("TabularMDP: gamma must lie in (0,1)");
  if (!(noise_sigma_ >= 0.0)) throw std::invalid_argument("TabularMDP: noise_sigma must be >= 0");
  if (start_state_ >= n_states_) throw std::invalid_argument("TabularMDP: start state out of range");

  successors_.resize(d);
  cumulative_offset_.resize(d + 1, 0);
  for (std::size_t j = 0; j < d; ++j) {
    const State s = j / n_actions_;
    double total = 0.0;
    for (State next = 0; next < n_states_; ++next) {
      const double p = transition_[j * n_states_ + next];
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw std::invalid_argument("TabularMDP: negative or non-finite transition probability");
      }
      total += p;
      if (p > 0.0) successors_[j].push_back({next, p});
    }
    if (std::abs(total - 1.0) > 1e-12) {
      std::ostringstream msg;
      msg << "TabularMDP: transition row (" << s << "," << j % n_actions_ << ") sums to " << total;
      throw std::invalid_argument(msg.str());
    }
    if (!std::isfinite(mean_reward_[j])) throw std::invalid_argument("TabularMDP: non-finite reward");
    if (terminal_[s]) {
      if (transition_[j * n_states_ + s] != 1.0 || mean_reward_[j] != 0.0) {
        throw std::invalid_argument("TabularMDP: terminal state " + std::to_string(s) +
                                    " must self-loop with zero reward");
      }
    } else {
      nonterminal_pairs_.push_back(j);
    }
    double acc = 0.0;
    for (const auto& succ : successors_[j]) {
      acc += succ.prob;
      cumulative_.push_back(acc);
    }
    cumulative_offset_[j + 1] = cumulative_.size();
  }
}

TabularMDP TabularMDP::with_gamma(double gamma) const {
  return TabularMDP(n_states_, n_actions_, transition_, mean_reward_, terminal_, gamma, noise_sigma_,
                    start_state_);
}

TabularMDP TabularMDP::with_noise(double noise_sigma) const {
  return TabularMDP(n_states_, n_actions_, transition_, mean_reward_, terminal_, gamma_, noise_sigma,
                    start_state_);
}

namespace {

// Deterministic grid move; off-grid moves keep the agent in place.
std::pair<std::size_t, std::size_t> grid_move(std::size_t r, std::size_t c, int dr, int dc,
                                              std::size_t rows, std::size_t cols) {
  const long nr = static_cast<long>(r) + dr;
  const long nc = static_cast<long>(c) + dc;
  if (nr < 0 || nc < 0 || nr >= static_cast<long>(rows) || nc >= static_cast<long>(cols)) return {r, c};
  return {static_cast<std::size_t>(nr), static_cast<std::size_t>(nc)};
}

}  // namespace

TabularMDP build_cliffwalking(double gamma, double noise_sigma) {
  using namespace cliff;
  const std::size_t ns = rows * cols, na = 4;
  std::vector<double> p(ns * na * ns, 0.0), r(ns * na, 0.0);
  std::vector<bool> term(ns, false);
  const State start = cell(3, 0), goal = cell(3, 11);
  term[goal] = true;
  // Indexed by action: up, right, down, left.
  const int dr[4] = {-1, 0, 1, 0};
  const int dc[4] = {0, 1, 0, -1};

  for (std::size_t row = 0; row < rows; ++row) {
    for (std::size_t col = 0; col < cols; ++col) {
      const State s = cell(row, col);
      for (Action a = 0; a < na; ++a) {
        const std::size_t j = s * na + a;
        if (term[s]) {
          p[j * ns + s] = 1.0;
          continue;
        }
        auto [nr, nc] = grid_move(row, col, dr[a], dc[a], rows, cols);
        const bool into_cliff = nr == 3 && nc >= 1 && nc <= 10;
        if (into_cliff) {
          p[j * ns + start] = 1.0;
          r[j] = -100.0;
        } else {
          const State next = cell(nr, nc);
          p[j * ns + next] = 1.0;
          r[j] = next == goal ? 0.0 : -1.0;
        }
      }
    }
  }
  return TabularMDP(ns, na, std::move(p), std::move(r), std::move(term), gamma, noise_sigma, start);
}

TabularMDP build_frozenlake(bool slippery, double gamma, double noise_sigma) {
  using namespace frozen;
  static constexpr const char* kMap[side] = {"SFFF", "FHFH", "FFFH", "HFFG"};
  const std::size_t ns = side * side, na = 4;
  std::vector<double> p(ns * na * ns, 0.0), r(ns * na, 0.0);
  std::vector<bool> term(ns, false);
  State goal = 0;
  for (std::size_t row = 0; row < side; ++row) {
    for (std::size_t col = 0; col < side; ++col) {
      const char c = kMap[row][col];
      if (c == 'H' || c == 'G') term[cell(row, col)] = true;
      if (c == 'G') goal = cell(row, col);
    }
  }
  // Indexed by action: left, down, right, up.
  const int dr[4] = {0, 1, 0, -1};
  const int dc[4] = {-1, 0, 1, 0};

  for (std::size_t row = 0; row < side; ++row) {
    for (std::size_t col = 0; col < side; ++col) {
      const State s = cell(row, col);
      for (Action a = 0; a < na; ++a) {
        const std::size_t j = s * na + a;
        if (term[s]) {
          p[j * ns + s] = 1.0;
          continue;
        }
        auto add_move = [&](Action dir, double prob) {
          auto [nr, nc] = grid_move(row, col, dr[dir], dc[dir], side, side);
          const State next = cell(nr, nc);
          p[j * ns + next] += prob;
          if (next == goal) r[j] += prob;
        };
        if (slippery) {
          add_move((a + 3) % 4, 1.0 / 3.0);
          add_move(a, 1.0 / 3.0);
          add_move((a + 1) % 4, 1.0 / 3.0);
        } else {
          add_move(a, 1.0);
        }
      }
    }
  }
  // Thirds may not add up to exactly 1 in floating point.
  for (std::size_t j = 0; j < ns * na; ++j) {
    double total = 0.0;
    for (State next = 0; next < ns; ++next) total += p[j * ns + next];
    for (State next = 0; next < ns; ++next) p[j * ns + next] /= total;
  }
  return TabularMDP(ns, na, std::move(p), std::move(r), std::move(term), gamma, noise_sigma, cell(0, 0));
}

TabularMDP build_random_mdp(std::size_t n_states, std::size_t n_actions, std::uint64_t seed,
                            double gamma, double noise_sigma) {
  if (n_states < 2) throw std::invalid_argument("build_random_mdp: need at least 2 states");
  if (n_actions < 1) throw std::invalid_argument("build_random_mdp: need at least 1 action");
  Rng rng = make_rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t d = n_states * n_actions;
  std::vector<double> p(d * n_states), r(d);
  for (std::size_t j = 0; j < d; ++j) {
    double total = 0.0;
    for (State next = 0; next < n_states; ++next) {
      p[j * n_states + next] = expo(rng) + 1e-3;
      total += p[j * n_states + next];
    }
    for (State next = 0; next < n_states; ++next) p[j * n_states + next] /= total;
    r[j] = unif(rng);
  }
  return TabularMDP(n_states, n_actions, std::move(p), std::move(r), std::vector<bool>(n_states, false),
                    gamma, noise_sigma, 0);
}

TabularMDP build_single_state(double reward, double gamma, double noise_sigma) {
  return TabularMDP(1, 1, {1.0}, {reward}, {false}, gamma, noise_sigma, 0);
}

TabularMDP build_two_state_chain(double p, double q, double reward0, double reward1, double gamma,
                                 double noise_sigma) {
  if (!(p >= 0.0 && p <= 1.0 && q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument("build_two_state_chain: p and q must be probabilities");
  }
  return TabularMDP(2, 1, {1.0 - p, p, q, 1.0 - q}, {reward0, reward1}, {false, false}, gamma,
                    noise_sigma, 0);
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

TabularMDP make_environment(const std::string& id, double gamma, double noise_sigma) {
  if (id == "cliffwalking") return build_cliffwalking(gamma, noise_sigma);
  if (id == "frozenlake") return build_frozenlake(false, gamma, noise_sigma);
  if (id == "frozenlake-slippery") return build_frozenlake(true, gamma, noise_sigma);
  const auto parts = split(id, ':');
  try {
    if (parts[0] == "random" && parts.size() == 3) {
      const auto dims = split(parts[1], 'x');
      if (dims.size() == 2) {
        return build_random_mdp(std::stoul(dims[0]), std::stoul(dims[1]), std::stoull(parts[2]), gamma,
                                noise_sigma);
      }
    }
    if (parts[0] == "single" && parts.size() == 2) {
      return build_single_state(std::stod(parts[1]), gamma, noise_sigma);
    }
    if (parts[0] == "chain" && parts.size() == 5) {
      return build_two_state_chain(std::stod(parts[1]), std::stod(parts[2]), std::stod(parts[3]),
                                   std::stod(parts[4]), gamma, noise_sigma);
    }
  } catch (const std::logic_error&) {
    // stoul/stod failures fall through to the generic error below.
  }
  throw std::invalid_argument("unknown environment id '" + id +
                              "' (expected cliffwalking, frozenlake, frozenlake-slippery, "
                              "random:<nS>x<nA>:<seed>, single:<r> or chain:<p>:<q>:<r0>:<r1>)");
}

State sample_next_state(const TabularMDP& mdp, State s, Action a, Rng& rng) {
  const std::size_t j = mdp.index(s, a);
  const auto& succ = mdp.successors_[j];
  if (succ.size() == 1) return succ.front().state;
  const double* cum = mdp.cumulative_.data() + mdp.cumulative_offset_[j];
  const double u = std::uniform_real_distribution<double>(0.0, cum[succ.size() - 1])(rng);
  const auto it = std::upper_bound(cum, cum + succ.size(), u);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - cum), succ.size() - 1);
  return succ[k].state;
}

BatchSample sample_batch(const TabularMDP& mdp, State s, Action a, std::size_t batch, Rng& rng) {
  if (batch == 0) throw std::invalid_argument("sample_batch: batch must be >= 1");
  BatchSample out;
  out.rewards.assign(batch, mdp.mean_reward(s, a));
  out.next_states.resize(batch);
  if (mdp.noise_sigma() > 0.0) {
    std::normal_distribution<double> noise(0.0, mdp.noise_sigma());
    for (double& r : out.rewards) r += noise(rng);
  }
  for (State& next : out.next_states) next = sample_next_state(mdp, s, a, rng);
  return out;
}

BatchSummary sample_batch_summary(const TabularMDP& mdp, State s, Action a, std::size_t batch,
                                  Rng& rng) {
  if (batch == 0) throw std::invalid_argument("sample_batch_summary: batch must be >= 1");
  BatchSummary out;
  out.size = batch;
  out.reward_mean = mdp.mean_reward(s, a);
  if (mdp.noise_sigma() > 0.0) {
    const double sd = mdp.noise_sigma() / std::sqrt(static_cast<double>(batch));
    out.reward_mean += std::normal_distribution<double>(0.0, sd)(rng);
  }
  const auto& succ = mdp.successors(s, a);
  std::size_t remaining = batch;
  double mass = 1.0;
  for (std::size_t k = 0; k < succ.size() && remaining > 0; ++k) {
    std::size_t count = remaining;
    if (k + 1 < succ.size()) {
      const double prob = std::clamp(succ[k].prob / mass, 0.0, 1.0);
      count = std::binomial_distribution<std::size_t>(remaining, prob)(rng);
      mass -= succ[k].prob;
    }
    if (count > 0) out.next_state_counts.emplace_back(succ[k].state, count);
    remaining -= count;
  }
  return out;
}

Action select_action(const QTable& q, State s, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("select_action: epsilon must lie in [0,1]");
  const std::size_t na = q.n_actions();
  auto random_action = [&] { return std::uniform_int_distribution<Action>(0, na - 1)(rng); };
  if (epsilon >= 1.0) return random_action();
  if (epsilon > 0.0 && std::bernoulli_distribution(epsilon)(rng)) return random_action();
  return q.argmax(s);
}

}  // namespace saql
