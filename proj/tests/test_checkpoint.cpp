#include <filesystem>

#include <catch_amalgamated.hpp>

#include <tddft/checkpoint.hpp>

using namespace tddft;

namespace {

GroundState sample_ground() {
  GroundState g;
  g.grid = GridSpec{5, 0.1, 3, 0.5, 2};
  g.grid.rho_kinetic_cap = 12.5;
  g.nuclei = {Nucleus{7.0, -1.0}, Nucleus{7.0, 1.0}};
  g.occupation = parse_configuration("1sg2 1pu1", Multiplicity::doublet);
  for (const auto& e : g.occupation.entries) {
    Orbital o;
    o.values = ComplexField::Random(5, 3);
    o.spin = e.spin;
    o.m = e.m;
    o.label = e.label;
    g.orbitals.push_back(o);
  }
  g.energies = {-1.0, -1.0, -0.25};
  g.state_index = {0, 0, 0};
  g.density = {RealField::Random(5, 3), RealField::Random(5, 3)};
  g.total_energy = -108.123456789;
  g.iterations = 17;
  return g;
}

PropagationState sample_state() {
  PropagationState s;
  s.step = 42;
  s.fields = {ComplexField::Random(5, 3), ComplexField::Random(5, 3)};
  s.absorbed = {1e-3, 2e-3};
  s.trace.labels = {"1sg.up", "1sg.dn"};
  s.trace.append(0.0, 0.0, {1.0, 1.0}, {0.0, 0.0});
  s.trace.append(0.1, 0.01, {0.99, 0.98}, {0.001, 0.002});
  s.krylov = {84, 1500, 3e-11};
  return s;
}

}  // namespace

TEST_CASE("Ground state survives a round trip bit for bit") {
  const GroundState g = sample_ground();
  const GroundState r = deserialize_ground_state(serialize_ground_state(g));
  CHECK(r.grid == g.grid);
  REQUIRE(r.orbitals.size() == g.orbitals.size());
  for (std::size_t i = 0; i < g.orbitals.size(); ++i) {
    CHECK(r.orbitals[i].values == g.orbitals[i].values);
    CHECK(r.orbitals[i].m == g.orbitals[i].m);
    CHECK(r.orbitals[i].label == g.orbitals[i].label);
  }
  CHECK(r.occupation == g.occupation);
  CHECK(r.energies == g.energies);
  CHECK(r.state_index == g.state_index);
  CHECK(r.density.up == g.density.up);
  CHECK(r.density.down == g.density.down);
  CHECK(r.total_energy == g.total_energy);
  CHECK(r.iterations == 17);
  CHECK(r.nuclei.size() == 2);
}

TEST_CASE("Propagation state round trip and tag check") {
  const PropagationState s = sample_state();
  const std::string bytes = serialize_propagation(s, "abc:run1");
  CHECK(deserialize_propagation(bytes, "abc:run1") == s);
  CHECK_THROWS_AS(deserialize_propagation(bytes, "abc:run2"), IoError);
}

TEST_CASE("Corrupt checkpoints are rejected") {
  const std::string bytes = serialize_propagation(sample_state(), "t");
  CHECK_THROWS_AS(deserialize_propagation(bytes.substr(0, bytes.size() / 2), "t"), IoError);
  CHECK_THROWS_AS(deserialize_propagation(bytes + "x", "t"), IoError);
  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_propagation(wrong_magic, "t"), IoError);
  CHECK_THROWS_AS(deserialize_ground_state(bytes), IoError);
  CHECK_THROWS_AS(deserialize_propagation("", "t"), IoError);
}

TEST_CASE("Checkpoint files are written atomically and reported on failure") {
  const auto dir = std::filesystem::temp_directory_path() / "tddft_checkpoint_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "sub" / "ground.ckpt";
  save_ground_state(path, sample_ground());
  CHECK(std::filesystem::exists(path));
  CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  CHECK(load_ground_state(path).total_energy == sample_ground().total_energy);
  CHECK_THROWS_AS(load_ground_state(dir / "missing.ckpt"), IoError);
  // A regular file where a directory is needed.
  CHECK_THROWS_AS(save_ground_state(path / "child.ckpt", sample_ground()), IoError);
  std::filesystem::remove_all(dir);
}
