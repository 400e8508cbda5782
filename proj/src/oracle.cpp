#include "saql/oracle.hpp"

#include <cmath>
#include <vector>

namespace saql {

namespace {

double state_value(const TabularMDP& mdp, const QTable& q, State s) {
  return mdp.terminal(s) ? 0.0 : q.max_value(s);
}

}  // namespace

QTable bellman(const TabularMDP& mdp, const QTable& q) {
  QTable out(mdp.n_states(), mdp.n_actions());
  std::vector<double> v(mdp.n_states());
  for (State s = 0; s < mdp.n_states(); ++s) v[s] = state_value(mdp, q, s);
  for (State s = 0; s < mdp.n_states(); ++s) {
    for (Action a = 0; a < mdp.n_actions(); ++a) {
      double ev = 0.0;
      for (const auto& succ : mdp.successors(s, a)) ev += succ.prob * v[succ.state];
      out(s, a) = mdp.mean_reward(s, a) + mdp.gamma() * ev;
    }
  }
  return out;
}

double bellman_residual(const TabularMDP& mdp, const QTable& q) {
  const QTable tq = bellman(mdp, q);
  double r = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) r = std::max(r, std::abs(q[j] - tq[j]));
  return r;
}

QTable value_iteration(const TabularMDP& mdp, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be > 0");
  const double target = tol * (1.0 - mdp.gamma());
  QTable q(mdp.n_states(), mdp.n_actions());
  for (;;) {
    QTable next = bellman(mdp, q);
    double diff = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) diff = std::max(diff, std::abs(next[j] - q[j]));
    q = std::move(next);
    // The residual of the new iterate is at most gamma * diff.
    if (mdp.gamma() * diff <= target || diff == 0.0) return q;
  }
}

Policy greedy_policy(const QTable& q) {
  Policy pi(q.n_states());
  for (State s = 0; s < q.n_states(); ++s) pi[s] = q.argmax(s);
  return pi;
}

Eigen::MatrixXd transition_policy_matrix(const TabularMDP& mdp, const Policy& pi) {
  if (pi.size() != mdp.n_states()) throw std::invalid_argument("transition_policy_matrix: policy size mismatch");
  const std::size_t d = mdp.dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  for (State s = 0; s < mdp.n_states(); ++s) {
    for (Action a = 0; a < mdp.n_actions(); ++a) {
      for (const auto& succ : mdp.successors(s, a)) {
        m(mdp.index(s, a), mdp.index(succ.state, pi[succ.state])) += succ.prob;
      }
    }
  }
  return m;
}

Eigen::MatrixXd linearization(const Eigen::MatrixXd& p_pi, double gamma) {
  return Eigen::MatrixXd::Identity(p_pi.rows(), p_pi.cols()) - gamma * p_pi;
}

Eigen::MatrixXd build_G(const TabularMDP& mdp, const Policy& pi_star) {
  return linearization(transition_policy_matrix(mdp, pi_star), mdp.gamma());
}

A1Report check_assumption_A1(const TabularMDP& mdp, const Policy& pi_star) {
  A1Report report;
  report.reward_bounded = mdp.noise_sigma() == 0.0;
  for (std::size_t j = 0; j < mdp.dim(); ++j) {
    const double r = mdp.mean_reward(j / mdp.n_actions(), j % mdp.n_actions());
    if (r < 0.0 || r > 1.0) report.reward_bounded = false;
  }

  const Eigen::MatrixXd m = transition_policy_matrix(mdp, pi_star);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd w = m * v;
    const double next = w.norm();
    if (next == 0.0) {
      lambda = 0.0;
      break;
    }
    v = w / next;
    const bool done = std::abs(next - lambda) < 1e-10;
    lambda = next;
    if (done) break;
  }
  report.rho_est = lambda;
  report.spectral_ok = lambda < 1.0 / mdp.gamma();
  return report;
}

Eigen::VectorXd uniform_nonterminal_mu(const TabularMDP& mdp) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(mdp.dim());
  const auto& pairs = mdp.nonterminal_pairs();
  if (pairs.empty()) throw std::invalid_argument("uniform_nonterminal_mu: every state is terminal");
  for (std::size_t j : pairs) mu(j) = 1.0 / static_cast<double>(pairs.size());
  return mu;
}

Eigen::MatrixXd compute_Sigma(const TabularMDP& mdp, const QTable& q_star, const Eigen::VectorXd& mu) {
  const std::size_t d = mdp.dim();
  if (static_cast<std::size_t>(mu.size()) != d) throw std::invalid_argument("compute_Sigma: mu has wrong size");
  if (mu.minCoeff() < 0.0 || std::abs(mu.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument("compute_Sigma: mu is not a distribution");
  }
  const double g = mdp.gamma();
  const double noise_var = mdp.noise_sigma() * mdp.noise_sigma();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    if (mu(j) == 0.0) continue;
    const State s = j / mdp.n_actions();
    const Action a = j % mdp.n_actions();
    double m1 = 0.0, m2 = 0.0;
    for (const auto& succ : mdp.successors(s, a)) {
      const double v = state_value(mdp, q_star, succ.state);
      m1 += succ.prob * v;
      m2 += succ.prob * v * v;
    }
    const double next_var = std::max(0.0, m2 - m1 * m1);
    sigma(j, j) = mu(j) * (noise_var + g * g * next_var);
  }
  return sigma;
}

Eigen::MatrixXd compute_Omega(const Eigen::MatrixXd& G, const Eigen::MatrixXd& Sigma) {
  if (G.rows() != G.cols() || G.rows() != Sigma.rows() || Sigma.rows() != Sigma.cols()) {
    throw std::invalid_argument("compute_Omega: dimension mismatch");
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
  if (!lu.isInvertible()) {
    throw SingularMatrixError("compute_Omega: G is singular (spectral condition on P*Pi violated)");
  }
  const Eigen::MatrixXd left = lu.solve(Sigma);                     // G^-1 Sigma
  const Eigen::MatrixXd omega = lu.solve(left.transpose());         // G^-1 Sigma^T G^-T
  return 0.5 * (omega + omega.transpose());
}

AsymptoticModel asymptotic_model(const TabularMDP& mdp, const QTable& q_star, const Eigen::VectorXd& mu) {
  AsymptoticModel model;
  model.mu = mu;
  model.G = build_G(mdp, greedy_policy(q_star));
  model.Sigma = compute_Sigma(mdp, q_star, mu);

  // Pairs outside the support are never refreshed and stay at their
  // initial value, so the linearisation lives on the support only.
  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    if (mu(j) > 0.0) support.push_back(j);
  }
  const auto k = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd jac(k, k), sig(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) {
      jac(r, c) = mu(support[r]) * model.G(support[r], support[c]);
      sig(r, c) = model.Sigma(support[r], support[c]);
    }
  }
  const Eigen::MatrixXd omega = compute_Omega(jac, sig);

  const auto d = mu.size();
  model.jacobian = Eigen::MatrixXd::Zero(d, d);
  model.Omega = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) {
      model.jacobian(support[r], support[c]) = jac(r, c);
      model.Omega(support[r], support[c]) = omega(r, c);
    }
  }
  return model;
}

}  // namespace saql
