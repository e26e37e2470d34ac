#include <cmath>

#include <catch_amalgamated.hpp>

#include <tddft/checkpoint.hpp>
#include <tddft/propagation.hpp>

using namespace tddft;

namespace {

const Grid& grid() {
  static const Grid g(GridSpec{161, 0.25, 10, 0.5, 2});
  return g;
}

std::vector<Nucleus> nuclei(const std::string& name) {
  const auto n = molecule_preset(name).nuclei();
  return {n.begin(), n.end()};
}

const KohnShamModel& n2_model() {
  static const KohnShamModel m(grid(), nuclei("N2"), true);
  return m;
}

const GroundState& n2_ground() {
  static const GroundState s = scf_solve(n2_model(), occupation_preset("N2", Multiplicity::singlet), ScfParams{});
  return s;
}

const KohnShamModel& h2_model() {
  static const KohnShamModel m(grid(), nuclei("H2+"), false);
  return m;
}

const GroundState& h2_ground() {
  static const GroundState s = [] {
    ScfParams p;
    p.interacting = false;
    return scf_solve(h2_model(), parse_configuration("1sg1", Multiplicity::doublet), p);
  }();
  return s;
}

LaserPulse short_pulse(double intensity) {
  LaserPulse p;
  p.intensity_wcm2 = intensity;
  p.n_cycles = 1.0;
  return p;
}

const AnalysisBox box{10.0, 5.0};

PropagatorSpec coarse_spec() {
  PropagatorSpec s;
  s.dt = 0.2;
  s.absorber.rho_onset = 6.0;
  return s;
}

}  // namespace

TEST_CASE("Absorber mask") {
  AbsorberSpec spec;
  spec.rho_onset = 6.0;
  const Absorber a(spec, grid(), box);
  CHECK(a.z_onset() == Catch::Approx(18.0));
  CHECK(a.rho_onset() == 6.0);
  const RealField& m = a.mask();
  CHECK(m(80, 0) == 1.0);
  CHECK(m(0, 0) == 0.0);
  CHECK(m(160, 0) == 0.0);
  CHECK(m.maxCoeff() == 1.0);
  CHECK(m.minCoeff() >= 0.0);
  AbsorberSpec overlap = spec;
  overlap.z_onset = 9.0;
  CHECK_THROWS_AS(Absorber(overlap, grid(), box), std::invalid_argument);
  AbsorberSpec beyond = spec;
  beyond.z_onset = 25.0;
  CHECK_THROWS_AS(Absorber(beyond, grid(), box), std::invalid_argument);
  AbsorberSpec off;
  off.enabled = false;
  const Absorber none(off, grid(), box);
  ComplexField psi = ComplexField::Ones(grid().n_z(), grid().n_rho());
  CHECK(none.apply(psi, grid()) == 0.0);
}

TEST_CASE("Propagator groups spin and m partners") {
  const Propagator p(n2_model(), n2_ground(), short_pulse(1e14), coarse_spec(),
                     FreezeMask::all_active(14), box);
  // 1sg 1su 2sg 2su 3sg and one 1pu group for all four pi spin-orbitals.
  CHECK(p.group_count() == 6);
  const Propagator frozen(n2_model(), n2_ground(), short_pulse(1e14), coarse_spec(),
                          FreezeMask::only(n2_ground().occupation, {"3sg"}), box);
  CHECK(frozen.group_count() == 1);
  CHECK(p.steps_per_cycle() == std::lround(p.pulse().period() / 0.2));
  CHECK(p.total_steps() == static_cast<long>(std::ceil(p.pulse().duration() / 0.2 - 1e-9)));
}

TEST_CASE("Field-free evolution of the ground state is stationary") {
  // Without the absorber, which would trim the tails of the outer orbitals.
  PropagatorSpec spec = coarse_spec();
  spec.absorber.enabled = false;
  const Propagator p(n2_model(), n2_ground(), short_pulse(0.0), spec, FreezeMask::all_active(14), box);
  PropagationState s = p.initial_state();
  p.run(s, 40);
  const auto& first = s.trace.bound.front();
  const auto& last = s.trace.bound.back();
  for (std::size_t j = 0; j < first.size(); ++j) CHECK(last[j] == Catch::Approx(first[j]).margin(1e-6));
  const SpinDensity d = p.density(s.fields);
  CHECK((d.total() - n2_ground().density.total()).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("Frozen orbitals keep their ground-state populations") {
  const auto mask = FreezeMask::only(n2_ground().occupation, {"3sg", "1pu"});
  const Propagator p(n2_model(), n2_ground(), short_pulse(4e14), coarse_spec(), mask, box);
  PropagationState s = p.initial_state();
  p.run(s, 60);
  const auto orbitals = p.orbitals(s);
  for (std::size_t i = 0; i < orbitals.size(); ++i) {
    if (mask.active[i]) continue;
    CHECK(s.trace.bound.back()[i] == s.trace.bound.front()[i]);
    CHECK(orbitals[i].values == n2_ground().orbitals[i].values);
  }
  CHECK(s.trace.bound.back()[13] < s.trace.bound.front()[13]);
}

TEST_CASE("Active orbitals stay orthogonal to frozen orbitals of their channel") {
  const auto mask = FreezeMask::only(n2_ground().occupation, {"3sg"});
  const Propagator p(n2_model(), n2_ground(), short_pulse(4e14), coarse_spec(), mask, box);
  PropagationState s = p.initial_state();
  p.run(s, 60);
  const auto orbitals = p.orbitals(s);
  const auto& occ = n2_ground().occupation;
  int checked = 0;
  for (std::size_t i = 0; i < orbitals.size(); ++i) {
    if (!mask.active[i]) continue;
    for (std::size_t j = 0; j < orbitals.size(); ++j) {
      if (mask.active[j] || occ.entries[j].m != occ.entries[i].m || occ.entries[j].spin != occ.entries[i].spin)
        continue;
      CHECK(std::abs(inner_product(orbitals[j].values, orbitals[i].values, grid())) < 1e-12);
      ++checked;
    }
  }
  CHECK(checked == 8);
}

TEST_CASE("Total norm never grows and box population falls under a strong field") {
  PropagatorSpec spec = coarse_spec();
  spec.scheme = UpdateScheme::frozen_potential;
  LaserPulse pulse = short_pulse(1e15);
  pulse.n_cycles = 2.0;
  const Propagator p(h2_model(), h2_ground(), pulse, spec, FreezeMask::all_active(1), box, 1);
  PropagationState s = p.initial_state();
  double previous = norm_squared(s.fields[0], grid());
  while (s.step < p.total_steps()) {
    p.step(s);
    const double now = norm_squared(s.fields[0], grid());
    REQUIRE(now <= previous + 1e-10);
    previous = now;
  }
  CHECK(s.trace.bound.back()[0] < s.trace.bound.front()[0] - 1e-3);
  CHECK(s.absorbed.back() > 0.0);
  // Escaped = inside-box loss, which includes everything absorbed.
  CHECK(1.0 - s.trace.bound.back()[0] >= s.trace.absorbed.back()[0]);
}

TEST_CASE("Propagation is deterministic across thread counts and restarts") {
  const LaserPulse pulse = short_pulse(2e14);
  const auto mask = FreezeMask::all_active(14);
  const Propagator one(n2_model(), n2_ground(), pulse, coarse_spec(), mask, box, 5, 1);
  const Propagator two(n2_model(), n2_ground(), pulse, coarse_spec(), mask, box, 5, 2);
  PropagationState a = one.initial_state();
  PropagationState b = two.initial_state();
  one.run(a, 30);
  two.run(b, 30);
  CHECK(a == b);

  PropagationState c = one.initial_state();
  one.run(c, 15);
  const std::string bytes = serialize_propagation(c, "tag");
  PropagationState d = deserialize_propagation(bytes, "tag");
  CHECK(d == c);
  one.run(d, 30);
  CHECK(d == a);
}

TEST_CASE("Checkpoint callback fires once per optical cycle") {
  PropagatorSpec spec = coarse_spec();
  LaserPulse pulse = short_pulse(1e14);
  pulse.n_cycles = 2.0;
  const Propagator p(h2_model(), h2_ground(), pulse, spec, FreezeMask::all_active(1), box, 10);
  PropagationState s = p.initial_state();
  std::vector<long> at;
  p.run(s, -1, [&](const PropagationState& st) { at.push_back(st.step); });
  REQUIRE(at.size() >= 2);
  CHECK(at[0] == p.steps_per_cycle());
  CHECK(at[1] == 2 * p.steps_per_cycle());
  CHECK(s.step == p.total_steps());
  CHECK(s.trace.times.back() == Catch::Approx(p.time_of(p.total_steps())));
}

TEST_CASE("Propagator rejects inconsistent inputs") {
  PropagatorSpec bad = coarse_spec();
  bad.dt = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(Propagator(h2_model(), h2_ground(), short_pulse(1e14), coarse_spec(), FreezeMask::all_active(2), box),
                  std::invalid_argument);
  CHECK_THROWS_AS(Propagator(h2_model(), h2_ground(), short_pulse(1e14), coarse_spec(), FreezeMask{{false}}, box),
                  std::invalid_argument);
  CHECK_THROWS_AS(Propagator(h2_model(), h2_ground(), short_pulse(1e14), coarse_spec(), FreezeMask::all_active(1),
                             AnalysisBox{30.0, 5.0}),
                  std::invalid_argument);
  CHECK(parse_update_scheme("frozen_potential") == UpdateScheme::frozen_potential);
  CHECK_THROWS_AS(parse_update_scheme("euler"), std::invalid_argument);
}
