#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <Eigen/Dense>

#include "field.hpp"
#include "grid.hpp"
#include "potentials.hpp"
#include "units.hpp"

namespace tddft {

namespace detail {

/// Cholesky factor of a symmetric positive-definite banded matrix, stored
/// as lower diagonals: band(i, k) = L(i, i - k).
class BandedCholesky {
 public:
  BandedCholesky() = default;

  /// diag(i) + the symmetric off-diagonals offdiag(k - 1) at distance k.
  BandedCholesky(int n, double diag, const Eigen::VectorXd& offdiag)
      : n_(n), p_(static_cast<int>(offdiag.size())), band_(n, p_ + 1) {
    band_.setZero();
    for (int i = 0; i < n_; ++i) {
      for (int k = p_; k >= 1; --k) {
        const int j = i - k;
        if (j < 0) continue;
        double s = offdiag(k - 1);
        for (int q = 1; q + k <= p_ && j - q >= 0; ++q) s -= band_(i, k + q) * band_(j, q);
        band_(i, k) = s / band_(j, 0);
      }
      double d = diag;
      for (int k = 1; k <= p_ && i - k >= 0; ++k) d -= band_(i, k) * band_(i, k);
      if (!(d > 0.0)) throw NumericalError("banded Cholesky: matrix not positive definite");
      band_(i, 0) = std::sqrt(d);
    }
  }

  template <typename Vec>
  void solve_in_place(Vec&& x) const {
    for (int i = 0; i < n_; ++i) {
      double s = x(i);
      for (int k = 1; k <= p_ && i - k >= 0; ++k) s -= band_(i, k) * x(i - k);
      x(i) = s / band_(i, 0);
    }
    for (int i = n_ - 1; i >= 0; --i) {
      double s = x(i);
      for (int k = 1; k <= p_ && i + k < n_; ++k) s -= band_(i + k, k) * x(i + k);
      x(i) = s / band_(i, 0);
    }
  }

 private:
  int n_ = 0;
  int p_ = 0;
  Eigen::MatrixXd band_;
};

inline double legendre(int l, double x) {
  double p0 = 1.0;
  if (l == 0) return p0;
  double p1 = x;
  for (int k = 1; k < l; ++k) {
    const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

}  // namespace detail

struct HartreeOptions {
  /// Highest multipole handled analytically.
  int max_multipole = 4;
  /// Exponent of the Gaussian model charges r^l exp(-alpha r^2) P_l.
  double model_exponent = 0.5;
  double tolerance = 1e-10;
  int max_iterations = 50;
};

/// Poisson solver for the Hartree potential of an axially symmetric density.
///
/// The density's multipoles up to max_multipole are carried by Gaussian
/// model charges whose potentials are known in closed form. The remainder has
/// vanishing low multipoles, so its potential decays fast enough to be solved
/// on the grid with zero values beyond the z edges. The grid equation
/// 2 T V = 4 pi n uses the m = 0 kinetic operator and is solved by conjugate
/// gradients preconditioned with the separable (radial eigenmode x banded z)
/// inverse of the same operator.
class HartreeSolver {
 public:
  explicit HartreeSolver(const Grid& grid, HartreeOptions options = {})
      : grid_(&grid), options_(options) {
    build_model_charges();
    build_separable_inverse();
  }

  const HartreeOptions& options() const { return options_; }
  /// Relative residual of the last grid solve.
  double last_residual() const { return last_residual_; }
  int last_iterations() const { return last_iterations_; }

  RealField solve(const RealField& density) const {
    const Grid& grid = *grid_;
    grid.check_shape(density);
    const int nl = options_.max_multipole + 1;
    Eigen::VectorXd moments(nl);
    for (int l = 0; l < nl; ++l) moments(l) = integrate(density.cwiseProduct(probes_[l]), grid);
    const Eigen::VectorXd coeff = moment_lu_.solve(moments);

    RealField residual_density = density;
    RealField potential = RealField::Zero(grid.n_z(), grid.n_rho());
    for (int l = 0; l < nl; ++l) {
      residual_density -= coeff(l) * model_density_[l];
      potential += coeff(l) * model_potential_[l];
    }
    potential += solve_grid(residual_density);
    return potential;
  }

  RealField solve(const SpinDensity& density) const { return solve(density.total()); }

  /// Applies -laplacian / (4 pi) on the grid, hard walls in z.
  RealField apply_operator(const RealField& v) const {
    return apply_kinetic(v, 0, *grid_) / (2.0 * units::pi);
  }

 private:
  void build_model_charges() {
    const Grid& grid = *grid_;
    const int nl = options_.max_multipole + 1;
    const double alpha = options_.model_exponent;
    model_density_.assign(nl, RealField(grid.n_z(), grid.n_rho()));
    model_potential_.assign(nl, RealField(grid.n_z(), grid.n_rho()));
    probes_.assign(nl, RealField(grid.n_z(), grid.n_rho()));
    for (int k = 0; k < grid.n_rho(); ++k) {
      for (int a = 0; a < grid.n_z(); ++a) {
        const double z = grid.z_points()(a);
        const double r = std::hypot(z, grid.rho_points()(k));
        const double c = z / r;
        const double ar2 = alpha * r * r;
        for (int l = 0; l < nl; ++l) {
          const double pl = detail::legendre(l, c);
          const double rl = std::pow(r, l);
          probes_[l](a, k) = rl * pl;
          model_density_[l](a, k) = rl * std::exp(-ar2) * pl;
          const double inner = boost::math::tgamma_lower(l + 1.5, ar2) /
                               (2.0 * std::pow(alpha, l + 1.5) * std::pow(r, l + 1));
          const double outer = rl * std::exp(-ar2) / (2.0 * alpha);
          model_potential_[l](a, k) = 4.0 * units::pi / (2.0 * l + 1.0) * (inner + outer) * pl;
        }
      }
    }
    Eigen::MatrixXd m(nl, nl);
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j)
        m(i, j) = integrate(probes_[i].cwiseProduct(model_density_[j]), grid);
    moment_lu_ = m.partialPivLu();
  }

  void build_separable_inverse() {
    const Grid& grid = *grid_;
    const int nr = grid.n_rho();
    const Eigen::VectorXd sw = grid.rho_weights().cwiseSqrt();
    const Eigen::MatrixXd& t = grid.kinetic_rho(0);
    Eigen::MatrixXd sym = sw.asDiagonal() * t * sw.cwiseInverse().asDiagonal();
    sym = 0.5 * (sym + sym.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    // V W^{1/2} Q maps nodal values onto radial eigenmodes.
    to_modes_ = sw.asDiagonal() * eig.eigenvectors();
    from_modes_ = eig.eigenvectors().transpose() * sw.cwiseInverse().asDiagonal();

    const Eigen::VectorXd& c = grid.stencil();
    const int p = static_cast<int>(c.size()) - 1;
    Eigen::VectorXd off(p);
    for (int k = 1; k <= p; ++k) off(k - 1) = -0.5 * c(k);
    z_factors_.clear();
    z_factors_.reserve(nr);
    for (int j = 0; j < nr; ++j)
      z_factors_.emplace_back(grid.n_z(), -0.5 * c(0) + eig.eigenvalues()(j), off);
  }

  /// Exact inverse of the kinetic operator T (m = 0) through the separable form.
  RealField apply_inverse_kinetic(const RealField& f) const {
    RealField modes = f * to_modes_;
    for (Eigen::Index j = 0; j < modes.cols(); ++j) z_factors_[j].solve_in_place(modes.col(j));
    return modes * from_modes_;
  }

  double weighted_dot(const RealField& a, const RealField& b) const {
    return a.cwiseProduct(b).cwiseProduct(grid_->cell_weights()).sum();
  }

  /// Solves T V = 2 pi n by preconditioned conjugate gradients.
  RealField solve_grid(const RealField& density) const {
    const Grid& grid = *grid_;
    const RealField rhs = 2.0 * units::pi * density;
    const double rhs_norm = std::sqrt(weighted_dot(rhs, rhs));
    RealField v = RealField::Zero(grid.n_z(), grid.n_rho());
    last_iterations_ = 0;
    last_residual_ = 0.0;
    if (rhs_norm == 0.0) return v;

    RealField r = rhs;
    RealField z = apply_inverse_kinetic(r);
    RealField p = z;
    double rz = weighted_dot(r, z);
    for (int it = 1; it <= options_.max_iterations; ++it) {
      const RealField tp = apply_kinetic(p, 0, grid);
      const double step = rz / weighted_dot(p, tp);
      v += step * p;
      r -= step * tp;
      last_iterations_ = it;
      last_residual_ = std::sqrt(weighted_dot(r, r)) / rhs_norm;
      if (last_residual_ <= options_.tolerance) return v;
      z = apply_inverse_kinetic(r);
      const double rz_next = weighted_dot(r, z);
      p = z + (rz_next / rz) * p;
      rz = rz_next;
    }
    throw NumericalError("Hartree solve did not converge: relative residual " +
                         std::to_string(last_residual_));
  }

  const Grid* grid_;
  HartreeOptions options_;
  std::vector<RealField> model_density_;
  std::vector<RealField> model_potential_;
  std::vector<RealField> probes_;
  Eigen::PartialPivLU<Eigen::MatrixXd> moment_lu_;
  Eigen::MatrixXd to_modes_;
  Eigen::MatrixXd from_modes_;
  std::vector<detail::BandedCholesky> z_factors_;
  mutable double last_residual_ = 0.0;
  mutable int last_iterations_ = 0;
};

/// One-shot Hartree potential; prefer a reused HartreeSolver in loops.
inline RealField solve_hartree(const SpinDensity& density, const Grid& grid,
                               HartreeOptions options = {}) {
  return HartreeSolver(grid, options).solve(density);
}

inline double hartree_energy(const RealField& density, const RealField& hartree, const Grid& grid) {
  return 0.5 * integrate(density.cwiseProduct(hartree), grid);
}

}  // namespace tddft
