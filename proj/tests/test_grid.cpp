#include <cmath>
#include <numbers>

#include <catch_amalgamated.hpp>

#include <tddft/grid.hpp>

using namespace tddft;

namespace {

Grid small_grid(double cap = 0.0) {
  GridSpec s{101, 0.2, 12, 0.4, 2};
  s.rho_kinetic_cap = cap;
  return Grid(s);
}

RealField gaussian(const Grid& g, double a, int m) {
  RealField f(g.n_z(), g.n_rho());
  for (int k = 0; k < g.n_rho(); ++k)
    for (int i = 0; i < g.n_z(); ++i) {
      const double z = g.z_points()(i), rho = g.rho_points()(k);
      f(i, k) = std::pow(rho, m) * std::exp(-a * (z * z + rho * rho));
    }
  return f;
}

}  // namespace

TEST_CASE("GridSpec validation") {
  CHECK_NOTHROW(GridSpec{11, 0.1, 4, 0.5, 2}.validate());
  CHECK_THROWS_AS((GridSpec{10, 0.1, 4, 0.5, 2}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((GridSpec{11, 0.0, 4, 0.5, 2}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((GridSpec{11, 0.1, 0, 0.5, 2}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((GridSpec{11, 0.1, 4, -1.0, 2}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((GridSpec{3, 0.1, 4, 0.5, 2}.validate()), std::invalid_argument);
  GridSpec capped{11, 0.1, 4, 0.5, 2};
  capped.rho_kinetic_cap = -1.0;
  CHECK_THROWS_AS(capped.validate(), std::invalid_argument);
}

TEST_CASE("Grid points are symmetric in z and follow the scaled Laguerre nodes") {
  const Grid g = small_grid();
  CHECK(g.z_points()(0) == Catch::Approx(-10.0));
  CHECK(g.z_points()(50) == 0.0);
  CHECK(g.z_half_extent() == Catch::Approx(10.0));
  const laguerre::Rule rule = laguerre::gauss_rule(12);
  CHECK(g.rho_points().isApprox(0.4 * rule.nodes));
}

TEST_CASE("Cell weights integrate a normalised Gaussian") {
  const Grid g = small_grid();
  const double a = 0.7;
  RealField f = gaussian(g, a, 0);
  // The radial rule is exact for polynomials times exp(-rho / h), not for Gaussians.
  const double exact = std::pow(std::numbers::pi / a, 1.5);
  CHECK(integrate(f, g) == Catch::Approx(exact).epsilon(2e-5));
}

TEST_CASE("Finite-difference stencil reproduces the second derivative") {
  for (int p = 1; p <= 4; ++p) {
    const Eigen::VectorXd c = detail::second_derivative_stencil(p);
    // Exact on x^2 and annihilates constants.
    double constant = c(0), quadratic = 0.0;
    for (int k = 1; k <= p; ++k) {
      constant += 2.0 * c(k);
      quadratic += 2.0 * c(k) * k * k;
    }
    CHECK(std::abs(constant) < 1e-12);
    CHECK(quadratic == Catch::Approx(2.0));
  }
  const Eigen::VectorXd c2 = detail::second_derivative_stencil(2);
  CHECK(c2(0) == Catch::Approx(-5.0 / 2.0));
  CHECK(c2(1) == Catch::Approx(4.0 / 3.0));
  CHECK(c2(2) == Catch::Approx(-1.0 / 12.0));
}

TEST_CASE("Kinetic operator is symmetric in the grid inner product") {
  for (double cap : {0.0, 20.0}) {
    const Grid g = small_grid(cap);
    for (int m : {0, 1}) {
      RealField a = RealField::Random(g.n_z(), g.n_rho());
      RealField b = RealField::Random(g.n_z(), g.n_rho());
      const double ab = inner_product(a, apply_kinetic(b, m, g), g);
      const double ba = inner_product(b, apply_kinetic(a, m, g), g);
      CHECK(ab == Catch::Approx(ba).epsilon(1e-10));
      CHECK(inner_product(a, apply_kinetic(a, m, g), g) > 0.0);
    }
  }
}

TEST_CASE("Kinetic energy of Gaussians matches the analytic value") {
  const Grid g = small_grid();
  const double a = 0.6;
  // m = 0: <T> = 3a/2 for exp(-a r^2).
  const RealField f0 = gaussian(g, a, 0);
  CHECK(inner_product(f0, apply_kinetic(f0, 0, g), g) / norm_squared(f0, g) ==
        Catch::Approx(1.5 * a).epsilon(2e-3));
  // m = 1: rho exp(-a r^2) exp(i phi) is a p orbital with <T> = 5a/2.
  const RealField f1 = gaussian(g, a, 1);
  CHECK(inner_product(f1, apply_kinetic(f1, 1, g), g) / norm_squared(f1, g) ==
        Catch::Approx(2.5 * a).epsilon(2e-3));
}

TEST_CASE("Complex kinetic application agrees with the real one") {
  const Grid g = small_grid();
  RealField re = RealField::Random(g.n_z(), g.n_rho());
  RealField im = RealField::Random(g.n_z(), g.n_rho());
  ComplexField c(g.n_z(), g.n_rho());
  c.real() = re;
  c.imag() = im;
  for (int m : {0, 1, -1}) {
    const ComplexField out = apply_kinetic(c, m, g);
    CHECK((out.real() - apply_kinetic(re, m, g)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((out.imag() - apply_kinetic(im, m, g)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("Radial kinetic cap bounds the spectrum and keeps the low end") {
  const laguerre::Rule rule = laguerre::gauss_rule(16);
  const Eigen::MatrixXd t = detail::radial_kinetic(rule, 0.5, 1);
  const Eigen::MatrixXd capped = detail::cap_spectrum(t, rule, 300.0);
  Eigen::EigenSolver<Eigen::MatrixXd> e0(t), e1(capped);
  Eigen::VectorXd v0 = e0.eigenvalues().real(), v1 = e1.eigenvalues().real();
  std::sort(v0.data(), v0.data() + v0.size());
  std::sort(v1.data(), v1.data() + v1.size());
  CHECK(v0.maxCoeff() > 300.0);
  CHECK(v1.maxCoeff() <= 300.0 + 1e-8);
  for (int i = 0; i < v0.size(); ++i)
    if (v0(i) < 300.0) CHECK(v1(i) == Catch::Approx(v0(i)).epsilon(1e-9));
  // A cap above the spectrum is a no-op.
  CHECK(detail::cap_spectrum(t, rule, 1e9) == t);
}

TEST_CASE("Shape mismatches are reported") {
  const Grid g = small_grid();
  CHECK_THROWS_AS(g.check_shape(RealField::Zero(3, 3)), ShapeError);
  CHECK_THROWS_AS(g.kinetic_rho(2), std::invalid_argument);
}
