#include <algorithm>
#include <cmath>
#include <random>

#include <catch_amalgamated.hpp>

#include <tddft/observables.hpp>

using namespace tddft;

TEST_CASE("Ion probabilities: two orbitals") {
  const std::vector<double> n{0.9, 0.8};
  const IonProbabilities p = ion_probabilities(n);
  CHECK(p.p0 == Catch::Approx(0.72).margin(1e-15));
  CHECK(p.p1 == Catch::Approx(0.26).margin(1e-15));
  CHECK(p.p2plus == Catch::Approx(0.02).margin(1e-15));
}

TEST_CASE("Ion probabilities: no escape and full escape") {
  const std::vector<double> bound(14, 1.0);
  const IonProbabilities p = ion_probabilities(bound);
  CHECK(p.p0 == 1.0);
  CHECK(p.p1 == 0.0);
  CHECK(p.p2plus == 0.0);
  const std::vector<double> one_out{1.0, 0.0, 1.0};
  CHECK(ion_probabilities(one_out).p1 == 1.0);
  const std::vector<double> two_out{0.0, 0.0};
  CHECK(ion_probabilities(two_out).p2plus == 1.0);
  CHECK(ion_probabilities(std::vector<double>{}).p0 == 1.0);
}

TEST_CASE("Ion probabilities match the direct sums") {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> n(1 + trial % 18);
    for (double& x : n) x = u(rng);
    double p0 = 1.0;
    for (double x : n) p0 *= x;
    double p1 = 0.0;
    for (std::size_t k = 0; k < n.size(); ++k) {
      double term = 1.0 - n[k];
      for (std::size_t j = 0; j < n.size(); ++j)
        if (j != k) term *= n[j];
      p1 += term;
    }
    const IonProbabilities p = ion_probabilities(n);
    CHECK(p.p0 == Catch::Approx(p0).margin(1e-15));
    CHECK(p.p1 == Catch::Approx(p1).margin(1e-14));
  }
}

TEST_CASE("Ion probabilities close to one and are permutation invariant") {
  std::mt19937 rng(20240501);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> n(1 + trial % 18);
    for (double& x : n) x = u(rng);
    const IonProbabilities p = ion_probabilities(n);
    CHECK(std::abs(p.p0 + p.p1 + p.p2plus - 1.0) <= 4 * std::numeric_limits<double>::epsilon());
    CHECK(p.p2plus >= 0.0);
    std::shuffle(n.begin(), n.end(), rng);
    const IonProbabilities q = ion_probabilities(n);
    CHECK(q.p0 == Catch::Approx(p.p0).epsilon(1e-13).margin(1e-300));
    CHECK(q.p1 == Catch::Approx(p.p1).epsilon(1e-13).margin(1e-300));
  }
}

TEST_CASE("Ion probabilities reject populations outside [0, 1]") {
  CHECK_THROWS_AS(ion_probabilities(std::vector<double>{0.5, 1.2}), std::invalid_argument);
  CHECK_THROWS_AS(ion_probabilities(std::vector<double>{-0.1}), std::invalid_argument);
  CHECK_THROWS_AS(ion_probabilities(std::vector<double>{std::nan("")}), std::invalid_argument);
  const auto c = clamp_populations(std::vector<double>{1.0 + 1e-15, -1e-16, 0.3});
  CHECK(c == std::vector<double>{1.0, 0.0, 0.3});
}

TEST_CASE("Bound population counts only the box") {
  const Grid g(GridSpec{81, 0.25, 10, 0.5, 2});
  const AnalysisBox box{5.0, 4.0};
  ComplexField psi = ComplexField::Ones(g.n_z(), g.n_rho());
  const double inside = bound_population(psi, box, g);
  const RealField w = box_weights(box, g);
  CHECK(inside == Catch::Approx(w.sum()));
  CHECK(inside < norm_squared(psi, g));
  // Enlarging the box never decreases N.
  double last = 0.0;
  for (double f : {0.5, 0.75, 1.0, 1.25, 1.5}) {
    const double n = bound_population(psi, box.scaled(f), g);
    CHECK(n >= last);
    last = n;
  }
  CHECK_THROWS_AS(box_weights(AnalysisBox{10.0, 4.0}, g), std::invalid_argument);
  CHECK_THROWS_AS(box_weights(AnalysisBox{5.0, 100.0}, g), std::invalid_argument);
  CHECK_THROWS_AS(AnalysisBox({-1.0, 2.0}).validate(), std::invalid_argument);
}

TEST_CASE("Population trace and ion yield") {
  PopulationTrace t;
  t.labels = {"a", "b"};
  t.append(0.0, 0.0, {1.0, 1.0}, {0.0, 0.0});
  t.append(1.0, 0.1, {0.5, 0.9}, {0.1, 0.0});
  t.append(2.0, 0.0, {0.9, 0.8}, {0.1, 0.0});
  CHECK(t.samples() == 3);
  CHECK(t.escaped(1, 0) == 0.5);
  CHECK_THROWS_AS(t.append(3.0, 0.0, {1.0}, {0.0}), std::invalid_argument);
  LaserPulse pulse;
  pulse.intensity_wcm2 = 2e14;
  const IonYieldRecord y = ion_yield(t, pulse, "N2", "singlet");
  CHECK(y.p0 == Catch::Approx(0.72));
  CHECK(y.p1 == Catch::Approx(0.26));
  CHECK(y.p1_max == Catch::Approx(0.5 * 0.1 + 0.5 * 0.9));
  CHECK(y.intensity_wcm2 == 2e14);
  CHECK(y.molecule == "N2");
  CHECK_THROWS_AS(ion_yield(PopulationTrace{}, pulse, "N2", "singlet"), std::invalid_argument);
}

TEST_CASE("Keldysh parameter") {
  LaserPulse pulse;
  pulse.intensity_wcm2 = 1e14;
  const double ip = units::ev_to_hartree(15.91);
  CHECK(ponderomotive_energy(pulse) == Catch::Approx(0.0522).epsilon(5e-3));
  CHECK(keldysh(ip, pulse) == Catch::Approx(2.37).epsilon(5e-3));
  // gamma = 1 when 2 U_p = I_p.
  CHECK(keldysh(2.0 * ponderomotive_energy(pulse), pulse) == Catch::Approx(1.0));
  LaserPulse four = pulse;
  four.intensity_wcm2 = 4e14;
  CHECK(keldysh(ip, four) == Catch::Approx(0.5 * keldysh(ip, pulse)));
  CHECK_THROWS_AS(keldysh(0.0, pulse), std::invalid_argument);
  LaserPulse dark = pulse;
  dark.intensity_wcm2 = 0.0;
  CHECK_THROWS_AS(keldysh(ip, dark), std::invalid_argument);
}

TEST_CASE("Interference parameter") {
  LaserPulse pulse;
  pulse.intensity_wcm2 = 1e14;
  const double up = ponderomotive_energy(pulse);
  const double w = pulse.omega();
  // Threshold: N omega = U_p + I_p exactly.
  CHECK(interference_parameter(5, pulse, 5 * w - up, 2.0).value() == Catch::Approx(0.0).margin(1e-7));
  // k_N = 1.
  CHECK(interference_parameter(5, pulse, 5 * w - up - 0.5, 2.0).value() == Catch::Approx(2.0));
  // Closed channel.
  CHECK_FALSE(interference_parameter(5, pulse, 5 * w, 2.0).has_value());

  const double ip_o2 = units::ev_to_hartree(11.45);
  const int n = lowest_open_channel(pulse, ip_o2);
  CHECK(n * w >= up + ip_o2);
  CHECK((n - 1) * w < up + ip_o2);
  const DiagnosticParams d = diagnostics(ip_o2, pulse, 2.282);
  CHECK(d.photons == n);
  REQUIRE(d.k_n_r.has_value());
  CHECK(*d.k_n_r == Catch::Approx(std::sqrt(2.0 * (n * w - up - ip_o2)) * 2.282));
}
