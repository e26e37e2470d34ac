#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "field.hpp"
#include "laguerre.hpp"

namespace tddft {

/// Discretisation parameters of the cylindrical (z, rho) grid.
struct GridSpec {
  int n_z = 0;
  double dz = 0.0;
  int n_rho = 0;
  double h_rho = 0.0;
  /// Half-width of the central second-derivative stencil; the stencil is
  /// accurate to order 2 * fd_order in dz.
  int fd_order = 2;
  /// Radial kinetic eigenvalues above this energy (hartree) are lowered to
  /// it; 0 keeps the exact mesh operator. Caps the stiffness of the |m| = 1
  /// block, whose top eigenvalue grows like 1/rho_1^2.
  double rho_kinetic_cap = 0.0;

  void validate() const {
    if (n_z < 1 || n_z % 2 == 0)
      throw std::invalid_argument("GridSpec: n_z must be a positive odd count, got " +
                                  std::to_string(n_z));
    if (!(dz > 0.0)) throw std::invalid_argument("GridSpec: dz must be positive");
    if (n_rho < 1) throw std::invalid_argument("GridSpec: n_rho must be >= 1");
    if (!(h_rho > 0.0)) throw std::invalid_argument("GridSpec: h_rho must be positive");
    if (fd_order < 1) throw std::invalid_argument("GridSpec: fd_order must be >= 1");
    if (rho_kinetic_cap < 0.0) throw std::invalid_argument("GridSpec: rho_kinetic_cap must be >= 0");
    if (2 * fd_order + 1 > n_z)
      throw std::invalid_argument("GridSpec: stencil wider than the z grid");
  }

  bool operator==(const GridSpec&) const = default;
};

namespace detail {

/// Central second-derivative weights c_0..c_p for unit spacing.
inline Eigen::VectorXd second_derivative_stencil(int p) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(p + 1);
  auto factorial = [](int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  const double pf2 = factorial(p) * factorial(p);
  for (int k = 1; k <= p; ++k) {
    const double sign = (k % 2 == 1) ? 1.0 : -1.0;
    c(k) = 2.0 * sign * pf2 / (double(k) * k * factorial(p - k) * factorial(p + k));
    c(0) -= 2.0 * c(k);
  }
  return c;
}

/// Derivatives of the Lagrange-Laguerre functions g_i(x) = l_i(x) exp(-(x - x_i)/2)
/// at the mesh nodes: entry (k, i) is g_i'(x_k).
inline Eigen::MatrixXd lagrange_derivatives(const laguerre::Rule& rule) {
  const int n = static_cast<int>(rule.nodes.size());
  Eigen::MatrixXd d(n, n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      d(k, i) = (k == i) ? -0.5 / rule.nodes(i)
                         : (rule.scaled_derivative(k) / rule.scaled_derivative(i)) /
                               (rule.nodes(k) - rule.nodes(i));
  return d;
}

/// Radial kinetic block acting on nodal values, in hartree.
///
/// m = 0 uses the plain Lagrange-Laguerre functions, for which both the
/// overlap and kinetic integrals are exact at the Gauss rule. |m| >= 1 uses
/// functions regularised by x / x_i so that they vanish on the axis; the
/// integrals are then taken at the Gauss rule. The centrifugal term is
/// m^2 / (2 rho_i^2) on the diagonal.
inline Eigen::MatrixXd radial_kinetic(const laguerre::Rule& rule, double h, int m) {
  const int n = static_cast<int>(rule.nodes.size());
  const Eigen::VectorXd& x = rule.nodes;
  const Eigen::VectorXd& lam = rule.scaled_weights;
  Eigen::MatrixXd d = lagrange_derivatives(rule);
  if (m != 0) {
    Eigen::MatrixXd r(n, n);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i) r(k, i) = (x(k) / x(i)) * d(k, i) + (k == i ? 1.0 / x(i) : 0.0);
    d = r;
  }
  const Eigen::VectorXd qw = lam.cwiseProduct(x);
  Eigen::MatrixXd stiffness = d.transpose() * qw.asDiagonal() * d;
  stiffness = 0.5 * (stiffness + stiffness.transpose());
  Eigen::MatrixXd t(n, n);
  for (int i = 0; i < n; ++i) t.row(i) = stiffness.row(i) / (2.0 * h * h * qw(i));
  for (int i = 0; i < n; ++i) t(i, i) += double(m) * m / (2.0 * h * h * x(i) * x(i));
  return t;
}

/// Lowers eigenvalues of a radial block above `cap` to `cap`, keeping the
/// block self-adjoint under the Gauss weights x_i Lambda_i.
inline Eigen::MatrixXd cap_spectrum(const Eigen::MatrixXd& t, const laguerre::Rule& rule, double cap) {
  const Eigen::VectorXd s = rule.nodes.cwiseProduct(rule.scaled_weights).cwiseSqrt();
  Eigen::MatrixXd sym = s.asDiagonal() * t * s.cwiseInverse().asDiagonal();
  sym = 0.5 * (sym + sym.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.eigenvalues().maxCoeff() <= cap) return t;
  const Eigen::VectorXd capped = eig.eigenvalues().cwiseMin(cap);
  const Eigen::MatrixXd& u = eig.eigenvectors();
  return s.cwiseInverse().asDiagonal() * (u * capped.asDiagonal() * u.transpose()) * s.asDiagonal();
}

}  // namespace detail

/// Hybrid finite-difference (z) / Lagrange-Laguerre (rho) grid. Immutable
/// after construction.
class Grid {
 public:
  explicit Grid(const GridSpec& spec) : spec_(spec) {
    spec_.validate();
    const int half = (spec_.n_z - 1) / 2;
    z_.resize(spec_.n_z);
    for (int a = 0; a < spec_.n_z; ++a) z_(a) = double(a - half) * spec_.dz;

    const laguerre::Rule rule = laguerre::gauss_rule(spec_.n_rho);
    rho_ = spec_.h_rho * rule.nodes;
    line_weights_ = spec_.h_rho * rule.scaled_weights;
    rho_weights_ = 2.0 * std::numbers::pi * rho_.cwiseProduct(line_weights_);
    cell_weights_ = spec_.dz * Eigen::VectorXd::Ones(spec_.n_z) * rho_weights_.transpose();

    stencil_ = detail::second_derivative_stencil(spec_.fd_order) / (spec_.dz * spec_.dz);
    for (int m = 0; m < 2; ++m) {
      kinetic_rho_[m] = detail::radial_kinetic(rule, spec_.h_rho, m);
      if (spec_.rho_kinetic_cap > 0.0)
        kinetic_rho_[m] = detail::cap_spectrum(kinetic_rho_[m], rule, spec_.rho_kinetic_cap);
      kinetic_rho_t_[m] = kinetic_rho_[m].transpose();
    }
  }

  const GridSpec& spec() const { return spec_; }
  int n_z() const { return spec_.n_z; }
  int n_rho() const { return spec_.n_rho; }
  Eigen::Index size() const { return Eigen::Index(spec_.n_z) * spec_.n_rho; }

  const Eigen::VectorXd& z_points() const { return z_; }
  const Eigen::VectorXd& rho_points() const { return rho_; }
  /// Weights for integrals over rho alone: int f(rho) drho.
  const Eigen::VectorXd& rho_line_weights() const { return line_weights_; }
  /// Radial weights with the 2 pi rho volume factor folded in.
  const Eigen::VectorXd& rho_weights() const { return rho_weights_; }
  /// Full volume element dz * 2 pi rho * w_rho at every grid point.
  const RealField& cell_weights() const { return cell_weights_; }

  double z_half_extent() const { return z_(spec_.n_z - 1); }

  /// Second-derivative stencil c_0..c_p already divided by dz^2.
  const Eigen::VectorXd& stencil() const { return stencil_; }

  /// Radial kinetic block for azimuthal number m (|m| <= 1).
  const Eigen::MatrixXd& kinetic_rho(int m) const { return kinetic_rho_[channel(m)]; }
  const Eigen::MatrixXd& kinetic_rho_transpose(int m) const {
    return kinetic_rho_t_[channel(m)];
  }

  template <typename Derived>
  void check_shape(const Eigen::MatrixBase<Derived>& f) const {
    if (f.rows() != spec_.n_z || f.cols() != spec_.n_rho)
      throw ShapeError("field shape " + std::to_string(f.rows()) + "x" +
                       std::to_string(f.cols()) + " does not match grid " +
                       std::to_string(spec_.n_z) + "x" + std::to_string(spec_.n_rho));
  }

 private:
  static int channel(int m) {
    const int am = m < 0 ? -m : m;
    if (am > 1) throw std::invalid_argument("only |m| <= 1 orbitals are supported");
    return am;
  }

  GridSpec spec_;
  Eigen::VectorXd z_;
  Eigen::VectorXd rho_;
  Eigen::VectorXd line_weights_;
  Eigen::VectorXd rho_weights_;
  RealField cell_weights_;
  Eigen::VectorXd stencil_;
  std::array<Eigen::MatrixXd, 2> kinetic_rho_;
  std::array<Eigen::MatrixXd, 2> kinetic_rho_t_;
};

inline Grid build_grid(const GridSpec& spec) { return Grid(spec); }

/// Volume integral of a real field over the grid.
template <typename Derived>
double integrate(const Eigen::MatrixBase<Derived>& field, const Grid& grid) {
  grid.check_shape(field);
  return field.cwiseProduct(grid.cell_weights()).sum();
}

/// <a|b> under the grid measure.
template <typename A, typename B>
auto inner_product(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const Grid& grid) {
  return (a.conjugate().cwiseProduct(b).cwiseProduct(grid.cell_weights().template cast<typename B::Scalar>())).sum();
}

template <typename Derived>
double norm_squared(const Eigen::MatrixBase<Derived>& f, const Grid& grid) {
  return f.cwiseAbs2().cwiseProduct(grid.cell_weights()).sum();
}

/// -1/2 d^2/dz^2 with hard walls, accumulated into out.
template <typename In, typename Out>
void add_kinetic_z(const Eigen::MatrixBase<In>& in, Eigen::MatrixBase<Out>& out, const Grid& grid) {
  const Eigen::VectorXd& c = grid.stencil();
  const Eigen::Index nz = in.rows();
  out += (-0.5 * c(0)) * in;
  for (Eigen::Index k = 1; k < c.size(); ++k) {
    const double ck = -0.5 * c(k);
    out.bottomRows(nz - k) += ck * in.topRows(nz - k);
    out.topRows(nz - k) += ck * in.bottomRows(nz - k);
  }
}

/// Radial kinetic part including the centrifugal term, accumulated into out.
template <typename In, typename Out>
void add_kinetic_rho(const Eigen::MatrixBase<In>& in, Eigen::MatrixBase<Out>& out, int m,
                     const Grid& grid) {
  out.noalias() += in * grid.kinetic_rho_transpose(m);
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> apply_kinetic(
    const Eigen::MatrixBase<Derived>& values, int m, const Grid& grid) {
  grid.check_shape(values);
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(values.rows(),
                                                                                    values.cols());
  add_kinetic_z(values, out, grid);
  add_kinetic_rho(values, out, m, grid);
  return out;
}

/// Complex fields are applied through their interleaved real view, so the
/// radial block becomes one real matrix product.
inline ComplexField apply_kinetic(const ComplexField& values, int m, const Grid& grid) {
  grid.check_shape(values);
  ComplexField out(values.rows(), values.cols());
  const Eigen::Index rows = 2 * values.rows();
  const Eigen::Map<const Eigen::MatrixXd> in(reinterpret_cast<const double*>(values.data()), rows,
                                             values.cols());
  Eigen::Map<Eigen::MatrixXd> res(reinterpret_cast<double*>(out.data()), rows, values.cols());
  res.noalias() = in * grid.kinetic_rho_transpose(m);
  const Eigen::VectorXd& c = grid.stencil();
  res += (-0.5 * c(0)) * in;
  for (Eigen::Index k = 1; k < c.size(); ++k) {
    const double ck = -0.5 * c(k);
    res.bottomRows(rows - 2 * k) += ck * in.topRows(rows - 2 * k);
    res.topRows(rows - 2 * k) += ck * in.bottomRows(rows - 2 * k);
  }
  return out;
}

inline ComplexField apply_kinetic(const Orbital& orbital, const Grid& grid) {
  return apply_kinetic(orbital.values, orbital.m, grid);
}

}  // namespace tddft
