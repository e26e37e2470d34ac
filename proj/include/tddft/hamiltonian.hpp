#pragma once

#include "field.hpp"
#include "grid.hpp"

namespace tddft {

/// H psi = (T_m + V) psi for one azimuthal channel and a local potential.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> apply_hamiltonian(
    const Eigen::MatrixBase<Derived>& psi, int m, const RealField& potential, const Grid& grid) {
  auto out = apply_kinetic(psi, m, grid);
  out += potential.cast<typename Derived::Scalar>().cwiseProduct(psi);
  return out;
}

/// z -> -z on the symmetric grid.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> reflect_z(
    const Eigen::MatrixBase<Derived>& f) {
  return f.colwise().reverse();
}

/// Projects onto the z-even (parity = +1) or z-odd (parity = -1) part.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> project_parity(
    const Eigen::MatrixBase<Derived>& f, int parity) {
  return 0.5 * (f + double(parity) * f.colwise().reverse());
}

/// <f| f(-z)> / <f|f>: +1 for even and -1 for odd functions of z.
template <typename Derived>
double z_parity(const Eigen::MatrixBase<Derived>& f, const Grid& grid) {
  const double norm = norm_squared(f, grid);
  if (norm == 0.0) return 0.0;
  return std::real(inner_product(f, reflect_z(f), grid)) / norm;
}

/// Symmetry label of a channel state, e.g. "3sg", given its counters.
inline std::string symmetry_label(int abs_m, int z_parity_sign, int& count_g, int& count_u) {
  // Inversion parity of exp(i m phi) psi(z, rho) is (-1)^m times the z parity.
  const bool gerade = (abs_m % 2 == 0) ? z_parity_sign > 0 : z_parity_sign < 0;
  const int n = gerade ? ++count_g : ++count_u;
  return std::to_string(n) + (abs_m == 0 ? "s" : "p") + (gerade ? "g" : "u");
}

}  // namespace tddft
