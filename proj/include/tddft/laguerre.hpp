#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace tddft::laguerre {

/// Gauss-Laguerre rule for the weight exp(-x) on [0, inf).
///
/// `scaled_weights` holds w_k exp(x_k), which stays representable for the
/// large nodes where w_k itself underflows. `scaled_derivative` holds
/// L_n'(x_k) exp(-x_k/2), needed for the Lagrange-function derivatives.
struct Rule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  Eigen::VectorXd scaled_weights;
  Eigen::VectorXd scaled_derivative;
};

/// Values of L_{n-1}(x) exp(-x/2) and L_n(x) exp(-x/2) by upward recurrence.
inline std::pair<double, double> scaled_pair(int n, double x) {
  double prev = std::exp(-0.5 * x);
  if (n == 0) return {0.0, prev};
  double cur = (1.0 - x) * prev;
  for (int k = 1; k < n; ++k) {
    const double next = ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return {prev, cur};
}

/// Plain Laguerre polynomial L_n(x), for tests and small arguments.
inline double polynomial(int n, double x) {
  return scaled_pair(n, x).second * std::exp(0.5 * x);
}

inline Rule gauss_rule(int n) {
  if (n < 1) throw std::invalid_argument("Gauss-Laguerre rule needs n >= 1");

  // Golub-Welsch for the initial nodes, then Newton polishing on L_n.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    jacobi(k, k) = 2.0 * k + 1.0;
    if (k + 1 < n) jacobi(k, k + 1) = jacobi(k + 1, k) = k + 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  Rule rule;
  rule.nodes = solver.eigenvalues();
  rule.weights.resize(n);
  rule.scaled_weights.resize(n);
  rule.scaled_derivative.resize(n);

  for (int k = 0; k < n; ++k) {
    double x = rule.nodes(k);
    for (int it = 0; it < 8; ++it) {
      const auto [lm1, ln] = scaled_pair(n, x);
      const double deriv = n * (ln - lm1) / x;
      const double step = ln / deriv;
      x -= step;
      if (std::abs(step) <= 1e-15 * x) break;
    }
    rule.nodes(k) = x;
    const auto [lm1, ln] = scaled_pair(n, x);
    // x L_n' = n (L_n - L_{n-1}); L_n(x_k) = 0 at a node.
    rule.scaled_derivative(k) = -n * lm1 / x;
    // w_k = 1 / (x_k [L_n'(x_k)]^2)
    const double d = rule.scaled_derivative(k);
    rule.scaled_weights(k) = 1.0 / (x * d * d);
    rule.weights(k) = rule.scaled_weights(k) * std::exp(-x);
    (void)ln;
  }
  return rule;
}

}  // namespace tddft::laguerre
