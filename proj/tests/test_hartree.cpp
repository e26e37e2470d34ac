#include <cmath>
#include <numbers>

#include <catch_amalgamated.hpp>

#include <tddft/hartree.hpp>

using namespace tddft;

namespace {

RealField gaussian_density(const Grid& g, double s, double z0 = 0.0) {
  RealField n(g.n_z(), g.n_rho());
  const double norm = std::pow(2.0 * std::numbers::pi * s * s, -1.5);
  for (int a = 0; a < g.n_z(); ++a)
    for (int k = 0; k < g.n_rho(); ++k) {
      const double z = g.z_points()(a) - z0, rho = g.rho_points()(k);
      n(a, k) = norm * std::exp(-(z * z + rho * rho) / (2.0 * s * s));
    }
  return n;
}

double max_relative_error(const RealField& v, const Grid& g, double s, double z0, double r_min) {
  double worst = 0.0;
  for (int a = 0; a < g.n_z(); ++a)
    for (int k = 0; k < g.n_rho(); ++k) {
      const double r = std::hypot(g.z_points()(a) - z0, g.rho_points()(k));
      if (r < r_min) continue;
      const double exact = std::erf(r / (s * std::sqrt(2.0))) / r;
      worst = std::max(worst, std::abs(v(a, k) - exact) / exact);
    }
  return worst;
}

}  // namespace

TEST_CASE("Hartree potential of a Gaussian density is erf(r / s sqrt 2) / r") {
  const Grid g(GridSpec{401, 0.05, 24, 0.3, 4});
  HartreeSolver solver(g);
  for (double s : {0.7, 1.3}) {
    const RealField n = gaussian_density(g, s);
    REQUIRE(integrate(n, g) == Catch::Approx(1.0).epsilon(1e-8));
    const RealField v = solver.solve(n);
    INFO("s = " << s);
    CHECK(max_relative_error(v, g, s, 0.0, 0.5) < 1e-6);
    CHECK(solver.last_residual() <= 1e-10);
    // E_H = 1 / (2 s sqrt(pi)) for a unit Gaussian.
    CHECK(hartree_energy(n, v, g) == Catch::Approx(0.5 / (s * std::sqrt(std::numbers::pi))).epsilon(1e-6));
  }
}

TEST_CASE("Hartree solver handles an off-centre charge through its multipoles") {
  const Grid g(GridSpec{401, 0.05, 24, 0.3, 4});
  const RealField n = gaussian_density(g, 0.9, 1.0);
  const RealField v = HartreeSolver(g).solve(n);
  CHECK(max_relative_error(v, g, 0.9, 1.0, 0.5) < 1e-4);
}

TEST_CASE("Hartree solve is linear and vanishes for zero density") {
  const Grid g(GridSpec{101, 0.2, 12, 0.4, 2});
  HartreeSolver solver(g);
  const RealField a = gaussian_density(g, 1.0), b = gaussian_density(g, 0.8, 0.5);
  const RealField lhs = solver.solve(RealField(2.0 * a + b));
  const RealField rhs = 2.0 * solver.solve(a) + solver.solve(b);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(solver.solve(RealField::Zero(g.n_z(), g.n_rho())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Legendre polynomials") {
  for (double x : {-0.7, 0.0, 0.4, 1.0}) {
    CHECK(detail::legendre(0, x) == 1.0);
    CHECK(detail::legendre(1, x) == Catch::Approx(x));
    CHECK(detail::legendre(2, x) == Catch::Approx(0.5 * (3 * x * x - 1)).margin(1e-15));
    CHECK(detail::legendre(3, x) == Catch::Approx(0.5 * (5 * x * x * x - 3 * x)).margin(1e-15));
  }
}
