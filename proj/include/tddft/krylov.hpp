#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "field.hpp"
#include "grid.hpp"

namespace tddft {

struct KrylovStats {
  int substeps = 0;
  int matvecs = 0;
  /// Largest estimated local error of an accepted substep, relative to the norm.
  double error = 0.0;
};

/// exp(-i H dt) psi by the Lanczos method in the grid inner product.
///
/// The Krylov space of dimension `order` comes from the three-term
/// recurrence, optionally with a full Gram-Schmidt pass per vector; the
/// result is beta_0 V y with |y| = 1, so the step is unitary up to the
/// orthogonality of V (about 1e-15 per step in practice). When the
/// a-posteriori error estimate beta_m |e_m^T exp(-i T tau) e_1| exceeds
/// `tolerance` for tau = dt, tau is shortened by halving and then bisection
/// to the longest step that passes, and the remaining time is covered by
/// further substeps.
template <typename ApplyH>
ComplexField krylov_exponential(const ComplexField& psi, double dt, ApplyH&& apply_h,
                                const Grid& grid, int order, double tolerance,
                                KrylovStats* stats = nullptr, bool reorthogonalize = false) {
  if (order < 2) throw std::invalid_argument("krylov: order must be >= 2");
  const Eigen::Index n = psi.size();
  const Eigen::Map<const Eigen::VectorXd> w(grid.cell_weights().data(), n);
  auto norm = [&](const Eigen::VectorXcd& a) { return std::sqrt(a.cwiseAbs2().dot(w)); };

  Eigen::VectorXcd current = Eigen::Map<const Eigen::VectorXcd>(psi.data(), n);
  double remaining = dt;
  // Basis vectors as columns; `weighted` holds W v for the inner products.
  Eigen::MatrixXcd basis(n, order + 1);
  Eigen::MatrixXcd weighted(n, order + 1);
  ComplexField work(psi.rows(), psi.cols());
  while (remaining != 0.0) {
    const double beta0 = norm(current);
    if (beta0 == 0.0) break;
    basis.col(0) = current / beta0;
    weighted.col(0) = basis.col(0).cwiseProduct(w);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(order);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(order);
    int dim = order;
    bool exact = false;
    for (int j = 0; j < order; ++j) {
      Eigen::Map<Eigen::VectorXcd>(work.data(), n) = basis.col(j);
      const ComplexField hv = apply_h(work);
      Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(hv.data(), n);
      if (stats) ++stats->matvecs;
      alpha(j) = std::real(weighted.col(j).dot(v));
      v -= alpha(j) * basis.col(j);
      if (j > 0) v -= beta(j - 1) * basis.col(j - 1);
      if (reorthogonalize) {
        const Eigen::VectorXcd c = weighted.leftCols(j + 1).adjoint() * v;
        v.noalias() -= basis.leftCols(j + 1) * c;
      }
      beta(j) = norm(v);
      const double scale = std::abs(alpha(j)) + (j > 0 ? beta(j - 1) : 0.0);
      if (beta(j) <= 1e-13 * std::max(scale, 1e-300)) {
        // Invariant subspace: the exponential is exact in it.
        dim = j + 1;
        exact = true;
        break;
      }
      basis.col(j + 1) = v / beta(j);
      weighted.col(j + 1) = basis.col(j + 1).cwiseProduct(w);
    }

    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(dim, dim);
    for (int j = 0; j < dim; ++j) {
      t(j, j) = alpha(j);
      if (j + 1 < dim) t(j, j + 1) = t(j + 1, j) = beta(j);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
    const Eigen::MatrixXd& q = eig.eigenvectors();
    auto small_exponential = [&](double tau) {
      Eigen::VectorXcd phase(dim);
      for (int k = 0; k < dim; ++k) phase(k) = std::exp(complex(0.0, -eig.eigenvalues()(k) * tau)) * q(0, k);
      return Eigen::VectorXcd(q.cast<complex>() * phase);
    };

    double tau = remaining;
    Eigen::VectorXcd y = small_exponential(tau);
    double err = exact ? 0.0 : beta(dim - 1) * std::abs(y(dim - 1));
    if (err > tolerance) {
      for (int halvings = 0; err > tolerance;) {
        tau *= 0.5;
        if (++halvings > 60)
          throw NumericalError("krylov: step size underflow (error estimate " + std::to_string(err) + ")");
        y = small_exponential(tau);
        err = beta(dim - 1) * std::abs(y(dim - 1));
      }
      // tau passes and 2 tau fails; bisect for the longest step this basis
      // supports. Only the small tridiagonal exponential is re-evaluated.
      double hi = 2.0 * tau;
      for (int k = 0; k < 6; ++k) {
        const double mid = 0.5 * (tau + hi);
        const Eigen::VectorXcd ym = small_exponential(mid);
        const double em = beta(dim - 1) * std::abs(ym(dim - 1));
        if (em <= tolerance) {
          tau = mid;
          y = ym;
          err = em;
        } else {
          hi = mid;
        }
      }
    }
    current = beta0 * (basis.leftCols(dim) * y);
    remaining = tau == remaining ? 0.0 : remaining - tau;
    if (stats) {
      ++stats->substeps;
      stats->error = std::max(stats->error, err);
    }
  }
  ComplexField out(psi.rows(), psi.cols());
  Eigen::Map<Eigen::VectorXcd>(out.data(), n) = current;
  return out;
}

}  // namespace tddft
