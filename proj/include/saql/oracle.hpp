#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "saql/mdp.hpp"
#include "saql/types.hpp"

namespace saql {

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct A1Report {
  bool reward_bounded = false;
  bool spectral_ok = false;
  double rho_est = 0.0;
};

/// Exact quantities of the limiting Gaussian law of the averaged iterate.
///
/// `G` is I - gamma * P * Pi for the greedy policy of Q*, `Sigma` the
/// mu-mixture of per-pair target covariances, and `jacobian` the
/// linearisation of the mean update actually performed when one pair drawn
/// from mu is refreshed per step, diag(mu) * G restricted to the support of
/// mu. Omega = jacobian^-1 * Sigma * jacobian^-T on that support and zero
/// elsewhere.
struct AsymptoticModel {
  Eigen::MatrixXd G;
  Eigen::MatrixXd Sigma;
  Eigen::MatrixXd Omega;
  Eigen::MatrixXd jacobian;
  Eigen::VectorXd mu;
};

/// Exact Bellman optimality operator. Terminal successors contribute 0.
QTable bellman(const TabularMDP& mdp, const QTable& q);

/// sup-norm of Q - T(Q).
double bellman_residual(const TabularMDP& mdp, const QTable& q);

/// Iterates Q <- T(Q) from zero until the returned table satisfies
/// ||Q - T(Q)|| <= tol * (1 - gamma), which bounds ||Q - Q*|| by tol.
QTable value_iteration(const TabularMDP& mdp, double tol = 1e-12);

Policy greedy_policy(const QTable& q);

/// (P Pi)[j][j'] = P[s][a][s'] * 1{a' = pi(s')}.
Eigen::MatrixXd transition_policy_matrix(const TabularMDP& mdp, const Policy& pi);

/// I - gamma * P Pi.
Eigen::MatrixXd linearization(const Eigen::MatrixXd& p_pi, double gamma);

Eigen::MatrixXd build_G(const TabularMDP& mdp, const Policy& pi_star);

/// Advisory check: rewards in [0,1] without noise, and the spectral radius
/// of P Pi (power iteration) below 1 / gamma.
A1Report check_assumption_A1(const TabularMDP& mdp, const Policy& pi_star);

/// Uniform distribution over non-terminal (s,a) pairs.
Eigen::VectorXd uniform_nonterminal_mu(const TabularMDP& mdp);

/// Sigma = E_mu[ Cov(R + gamma * max_a' Q*(S',a') | S,A) e e^T ], which is
/// diagonal with entry mu_j * (sigma^2 + gamma^2 * Var_{S'}(V*(S'))).
Eigen::MatrixXd compute_Sigma(const TabularMDP& mdp, const QTable& q_star, const Eigen::VectorXd& mu);

/// G^-1 * Sigma * G^-T through an LU solve. Throws SingularMatrixError.
Eigen::MatrixXd compute_Omega(const Eigen::MatrixXd& G, const Eigen::MatrixXd& Sigma);

AsymptoticModel asymptotic_model(const TabularMDP& mdp, const QTable& q_star, const Eigen::VectorXd& mu);

}  // namespace saql
