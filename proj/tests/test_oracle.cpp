#include <gtest/gtest.h>

#include <cmath>
#include <deque>

#include "saql/mdp.hpp"
#include "saql/oracle.hpp"

using namespace saql;

TEST(ValueIteration, SingleStateGeometricSeries) {
  const auto mdp = build_single_state(0.7, 0.8, 0.0);
  const auto q = value_iteration(mdp, 1e-12);
  EXPECT_NEAR(q[0], 0.7 / 0.2, 1e-11);
}

TEST(ValueIteration, ResidualBound) {
  for (double tol : {1e-4, 1e-8, 1e-12}) {
    const auto mdp = build_random_mdp(6, 3, 11, 0.95);
    const auto q = value_iteration(mdp, tol);
    EXPECT_LE(bellman_residual(mdp, q), tol * (1 - mdp.gamma()) + 1e-15);
  }
  EXPECT_THROW(value_iteration(build_single_state(1, 0.5, 0), 0.0), std::invalid_argument);
}

TEST(ValueIteration, FrozenLakeShortestPath) {
  const auto mdp = build_frozenlake(false, 0.9);
  const auto q = value_iteration(mdp, 1e-10);
  EXPECT_NEAR(q.max_value(0), std::pow(0.9, 5), 1e-10);
  for (State s : {5u, 7u, 11u, 12u, 15u}) EXPECT_EQ(q.max_value(s), 0.0);
}

TEST(ValueIteration, CliffOptimalDetour) {
  // Up, eleven moves right along row 2, then down into the goal: twelve
  // moves at -1 and a final move at 0.
  const double g = 0.9;
  const auto q = value_iteration(build_cliffwalking(g), 1e-12);
  double expected = 0.0;
  for (int k = 0; k <= 11; ++k) expected -= std::pow(g, k);
  EXPECT_NEAR(q(cliff::cell(3, 0), cliff::up), expected, 1e-10);
  EXPECT_EQ(q.argmax(cliff::cell(3, 0)), cliff::up);
}

TEST(GreedyPolicy, ArgmaxAndTies) {
  const QTable q(2, 3, std::vector<double>{1, 2, 3, 4, 4, 4});
  const auto pi = greedy_policy(q);
  EXPECT_EQ(pi[0], 2u);
  EXPECT_EQ(pi[1], 0u);
}

TEST(GreedyPolicy, FrozenLakeFollowsShortestSafePath) {
  const auto mdp = build_frozenlake(false, 0.9);
  const auto pi = greedy_policy(value_iteration(mdp));
  // Breadth-first distances to the goal over safe cells.
  std::vector<int> dist(16, -1);
  dist[15] = 0;
  std::deque<State> frontier{15};
  while (!frontier.empty()) {
    const State s = frontier.front();
    frontier.pop_front();
    for (State p = 0; p < 16; ++p) {
      if (mdp.terminal(p) || dist[p] >= 0) continue;
      for (Action a = 0; a < 4; ++a) {
        if (mdp.transition(p, a, s) == 1.0) {
          dist[p] = dist[s] + 1;
          frontier.push_back(p);
          break;
        }
      }
    }
  }
  State s = 0;
  int steps = 0;
  while (s != 15 && steps < 16) {
    const State next = mdp.successors(s, pi[s])[0].state;
    ASSERT_FALSE(mdp.terminal(next) && next != 15) << "policy walks into a hole at " << s;
    EXPECT_EQ(dist[next], dist[s] - 1);
    s = next;
    ++steps;
  }
  EXPECT_EQ(steps, dist[0]);
  EXPECT_EQ(steps, 6);
}

TEST(BuildG, IdentityAtZeroDiscountAndStochasticRows) {
  const auto mdp = build_random_mdp(4, 2, 3, 0.6);
  const auto pi = greedy_policy(value_iteration(mdp));
  const auto p_pi = transition_policy_matrix(mdp, pi);
  EXPECT_TRUE(linearization(p_pi, 0.0).isApprox(Eigen::MatrixXd::Identity(8, 8)));
  const auto G = build_G(mdp, pi);
  const Eigen::MatrixXd rows = (Eigen::MatrixXd::Identity(8, 8) - G) / 0.6;
  for (Eigen::Index i = 0; i < 8; ++i) EXPECT_NEAR(rows.row(i).sum(), 1.0, 1e-12);
}

TEST(BuildG, ScalarCase) {
  const auto mdp = build_single_state(1.0, 0.75, 0.0);
  const auto G = build_G(mdp, {0});
  EXPECT_NEAR(G(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(G.inverse()(0, 0), 4.0, 1e-12);
}

TEST(AssumptionA1, Reports) {
  const auto cliff = build_cliffwalking();
  const auto a = check_assumption_A1(cliff, greedy_policy(value_iteration(cliff)));
  EXPECT_FALSE(a.reward_bounded);
  EXPECT_TRUE(a.spectral_ok);
  EXPECT_NEAR(a.rho_est, 1.0, 1e-8);

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto mdp = build_random_mdp(5, 3, seed, 0.99);
    const auto r = check_assumption_A1(mdp, greedy_policy(value_iteration(mdp)));
    EXPECT_TRUE(r.reward_bounded);
    EXPECT_TRUE(r.spectral_ok);
    EXPECT_NEAR(r.rho_est, 1.0, 1e-8);
  }
  const auto noisy = build_random_mdp(3, 2, 1, 0.9, 0.5);
  EXPECT_FALSE(check_assumption_A1(noisy, greedy_policy(value_iteration(noisy))).reward_bounded);
}

TEST(Sigma, DeterministicNoiseFreeIsZero) {
  const auto mdp = build_frozenlake(false, 0.9, 0.0);
  const auto q = value_iteration(mdp);
  EXPECT_EQ(compute_Sigma(mdp, q, uniform_nonterminal_mu(mdp)).norm(), 0.0);
}

TEST(Sigma, SingleStateRewardNoise) {
  const auto mdp = build_single_state(1.0, 0.5, 2.0);
  const auto q = value_iteration(mdp);
  const Eigen::VectorXd mu = Eigen::VectorXd::Ones(1);
  EXPECT_NEAR(compute_Sigma(mdp, q, mu)(0, 0), 4.0, 1e-12);
}

TEST(Sigma, TwoStateChainByEnumeration) {
  const double p = 0.3, q = 0.6, g = 0.8, sd = 0.5;
  const auto mdp = build_two_state_chain(p, q, 1.0, 0.0, g, sd);
  const auto qs = value_iteration(mdp);
  const Eigen::VectorXd mu = uniform_nonterminal_mu(mdp);
  const auto sigma = compute_Sigma(mdp, qs, mu);
  const double v0 = qs[0], v1 = qs[1];
  // Target = R + g * V(S'); enumerate the two outcomes of S'.
  auto target_var = [&](double stay_v, double move_v, double move_p) {
    const double m = (1 - move_p) * stay_v + move_p * move_v;
    const double m2 = (1 - move_p) * stay_v * stay_v + move_p * move_v * move_v;
    return sd * sd + g * g * (m2 - m * m);
  };
  EXPECT_NEAR(sigma(0, 0), 0.5 * target_var(v0, v1, p), 1e-12);
  EXPECT_NEAR(sigma(1, 1), 0.5 * target_var(v1, v0, q), 1e-12);
  EXPECT_NEAR(sigma(0, 0), 0.5 * (sd * sd + g * g * p * (1 - p) * (v1 - v0) * (v1 - v0)), 1e-12);
  EXPECT_EQ(sigma(0, 1), 0.0);
  EXPECT_NEAR(mu.sum(), 1.0, 1e-15);
}

TEST(Sigma, RejectsBadMu) {
  const auto mdp = build_two_state_chain(0.3, 0.6, 1.0, 0.0, 0.5, 0.0);
  const auto q = value_iteration(mdp);
  EXPECT_THROW(compute_Sigma(mdp, q, Eigen::VectorXd::Ones(2)), std::invalid_argument);
  EXPECT_THROW(compute_Sigma(mdp, q, Eigen::VectorXd::Ones(3) / 3), std::invalid_argument);
}

TEST(Omega, TrivialCases) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd S = (Eigen::MatrixXd(3, 3) << 2, 1, 0, 1, 3, 1, 0, 1, 4).finished();
  EXPECT_TRUE(compute_Omega(I, S).isApprox(S, 1e-14));
  EXPECT_EQ(compute_Omega(I + 0.1 * S, Eigen::MatrixXd::Zero(3, 3)).norm(), 0.0);
  const Eigen::MatrixXd G1 = Eigen::MatrixXd::Constant(1, 1, 0.25);
  const Eigen::MatrixXd S1 = Eigen::MatrixXd::Constant(1, 1, 3.0);
  EXPECT_NEAR(compute_Omega(G1, S1)(0, 0), 3.0 / (0.25 * 0.25), 1e-12);
  EXPECT_THROW(compute_Omega(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Identity(2, 2)), SingularMatrixError);
}

TEST(Omega, MatchesExplicitInverseForm) {
  const auto mdp = build_random_mdp(3, 2, 5, 0.7, 0.3);
  const auto q = value_iteration(mdp);
  const auto pi = greedy_policy(q);
  const auto G = build_G(mdp, pi);
  const auto S = compute_Sigma(mdp, q, uniform_nonterminal_mu(mdp));
  const Eigen::MatrixXd Gi = G.inverse();
  const Eigen::MatrixXd expected = Gi * S * Gi.transpose();
  EXPECT_LT((compute_Omega(G, S) - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Omega, SymmetricPsdOnRandomMdps) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto mdp = build_random_mdp(2 + seed % 4, 1 + seed % 3, seed, 0.5 + 0.02 * seed, 0.2 * (seed % 3));
    const auto q = value_iteration(mdp);
    const auto model = asymptotic_model(mdp, q, uniform_nonterminal_mu(mdp));
    EXPECT_LT((model.Sigma - model.Sigma.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((model.Omega - model.Omega.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.Omega);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8) << "seed " << seed;
    const auto full = compute_Omega(model.G, model.Sigma);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(full).eigenvalues().minCoeff(), -1e-8);
  }
}

TEST(AsymptoticModel, SingleStateMatchesScalarFormula) {
  const double g = 0.6, sd = 1.5;
  const auto mdp = build_single_state(0.2, g, sd);
  const auto model = asymptotic_model(mdp, value_iteration(mdp), uniform_nonterminal_mu(mdp));
  EXPECT_NEAR(model.Omega(0, 0), sd * sd / ((1 - g) * (1 - g)), 1e-12);
  EXPECT_NEAR(model.jacobian(0, 0), 1 - g, 1e-15);
}

TEST(AsymptoticModel, TerminalPairsCarryNoVariance) {
  const auto mdp = build_frozenlake(true, 0.9, 1.0);
  const auto model = asymptotic_model(mdp, value_iteration(mdp), uniform_nonterminal_mu(mdp));
  for (State s : {5u, 15u}) {
    for (Action a = 0; a < 4; ++a) {
      const auto j = static_cast<Eigen::Index>(mdp.index(s, a));
      EXPECT_EQ(model.Omega.row(j).norm(), 0.0);
      EXPECT_EQ(model.mu(j), 0.0);
    }
  }
}
