#include <filesystem>
#include <fstream>
#include <sstream>

#include <catch_amalgamated.hpp>

#include <tddft/runner.hpp>

using namespace tddft;
namespace fs = std::filesystem;

namespace {

// One-electron H2+ on a coarse grid: fast enough for end-to-end runs.
const char* base_config = R"(
[run]
preset = desk
observe_every = 5
[molecule]
name = H2+
[scf]
interacting = false
[grid]
n_z = 161
dz = 0.25
n_rho = 10
h_rho = 0.5
[pulse]
n_cycles = 1
intensity_wcm2 = 2e14
[propagator]
dt = 0.2
[box]
z_half_extent = 10
rho_extent = 5
[absorber]
rho_onset = 6
)";

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tddft_runner_" + name);
  fs::remove_all(dir);
  return dir;
}

ScenarioConfig config_in(const fs::path& dir, const std::string& extra = "") {
  ScenarioConfig c = parse_config(std::string(base_config) + extra);
  c.output = dir.string();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("A scenario writes traces, yields, a summary and a manifest") {
  const fs::path dir = fresh_dir("basic");
  const ScenarioOutcome out = run_scenario(config_in(dir));
  CHECK(out.failed_numerical == 0);
  CHECK(out.failed_io == 0);
  const json& m = out.manifest;
  REQUIRE(m["runs"].size() == 1);
  const json& run = m["runs"][0];
  CHECK(run["status"] == "complete");
  CHECK(run["steps_done"] == run["total_steps"]);
  for (const auto& f : m["artifacts"]) CHECK(fs::exists(dir / f.get<std::string>()));
  CHECK(fs::exists(dir / "manifest.json"));

  const auto trace = lines(slurp(dir / run["artifacts"]["trace"].get<std::string>()));
  CHECK(trace[0] == "time_au,E_t,N_1sg.up");
  const long steps = run["total_steps"];
  // Samples at step 0, every 5 steps and the final step.
  CHECK(trace.size() == 1 + 1 + static_cast<std::size_t>(steps / 5) + (steps % 5 ? 1 : 0));

  const auto yields = lines(slurp(dir / "yields.csv"));
  REQUIRE(yields.size() == 2);
  CHECK(yields[0] == "intensity_Wcm2,wavelength_nm,molecule,occupation,P0,P1,P2plus");
  CHECK(yields[1].rfind("200000000000000,390,H2+,doublet,", 0) == 0);
  const double p1 = run["yield"]["P1"];
  CHECK(p1 > 0.0);
  CHECK(p1 < 1.0);
  CHECK(m["ground_states"][0]["ionization_potential_ev"].get<double>() > 20.0);
  CHECK(slurp(dir / "summary.txt").find("Ion yields P1") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("A completed scenario is not recomputed") {
  const fs::path dir = fresh_dir("idempotent");
  run_scenario(config_in(dir));
  const auto stamp = fs::last_write_time(dir / "runs");
  const std::string trace_path = (dir / "runs").string();
  std::vector<std::string> log;
  RunOptions opts;
  opts.log = [&](const std::string& s) { log.push_back(s); };
  const auto before = slurp(dir / "yields.csv");
  run_scenario(config_in(dir), opts);
  CHECK(std::find(log.begin(), log.end(), "all runs complete; nothing to do") != log.end());
  for (const auto& l : log) CHECK(l.find("starting") == std::string::npos);
  CHECK(slurp(dir / "yields.csv") == before);
  CHECK(fs::last_write_time(dir / "runs") == stamp);
  fs::remove_all(dir);
}

TEST_CASE("An interrupted run resumes to the same result") {
  const fs::path straight = fresh_dir("straight");
  const fs::path broken = fresh_dir("broken");
  const ScenarioOutcome a = run_scenario(config_in(straight));
  RunOptions stop;
  stop.step_limit = 40;
  const ScenarioOutcome partial = run_scenario(config_in(broken), stop);
  CHECK(partial.manifest["runs"][0]["status"] == "incomplete");
  CHECK(partial.manifest["runs"][0]["steps_done"] == 40);
  const ScenarioOutcome b = run_scenario(config_in(broken));
  CHECK(b.manifest["runs"][0]["status"] == "complete");
  const std::string id = a.manifest["runs"][0]["id"];
  CHECK(slurp(straight / "runs" / id / "trace.csv") == slurp(broken / "runs" / id / "trace.csv"));
  CHECK(slurp(straight / "yields.csv") == slurp(broken / "yields.csv"));
  fs::remove_all(straight);
  fs::remove_all(broken);
}

TEST_CASE("Identical scenarios give identical CSV output") {
  const fs::path a = fresh_dir("det_a");
  const fs::path b = fresh_dir("det_b");
  RunOptions two;
  two.threads = 2;
  run_scenario(config_in(a, "[sweep]\nintensities_wcm2 = 1e14, 3e14\n"));
  run_scenario(config_in(b, "[sweep]\nintensities_wcm2 = 1e14, 3e14\n"), two);
  CHECK(slurp(a / "yields.csv") == slurp(b / "yields.csv"));
  CHECK(lines(slurp(a / "yields.csv")).size() == 3);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("An empty run set writes only the manifest") {
  const fs::path dir = fresh_dir("empty");
  const ScenarioOutcome out = run_scenario(config_in(dir, "[sweep]\nintensities_wcm2 =\n"));
  CHECK(out.manifest["runs"].empty());
  CHECK(out.manifest["artifacts"].empty());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path().filename());
  CHECK(files == std::vector<fs::path>{"manifest.json"});
  fs::remove_all(dir);
}

TEST_CASE("Sweep plans") {
  const ScenarioConfig c = parse_config(
      "[molecule]\nname = F2\n[pulse]\nintensity_wcm2 = 2e14\n[freeze]\nactive = 3sg; 1pu; 1pg; 3sg, 1pu, 1pg\n");
  const auto plans = plan_runs(c);
  REQUIRE(plans.size() == 4);
  CHECK(plans[0].id == "F2-singlet-I2e+14-390nm-3sg");
  CHECK(plans[3].id == "F2-singlet-I2e+14-390nm-3sg+1pu+1pg");
  const ScenarioConfig o2 = parse_config(
      "[molecule]\nname = O2\n[sweep]\nmultiplicities = singlet, triplet\nintensities_wcm2 = 1e14, 2e14, 4e14, 6e14, 8e14\n");
  CHECK(plan_runs(o2).size() == 10);
}

TEST_CASE("Reports regenerate from the manifest alone") {
  const fs::path dir = fresh_dir("report");
  run_scenario(config_in(dir));
  const std::string yields = slurp(dir / "yields.csv");
  fs::remove(dir / "yields.csv");
  fs::remove(dir / "summary.txt");
  const std::string summary = regenerate_reports(dir);
  CHECK(slurp(dir / "yields.csv") == yields);
  CHECK(slurp(dir / "summary.txt") == summary);
  CHECK(stored_config(dir) == [&] {
    ScenarioConfig c = config_in(dir);
    c.lines.clear();
    return c;
  }());
  CHECK_THROWS_AS(regenerate_reports(dir / "nowhere"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("A changed scenario replaces the old results in the same directory") {
  const fs::path dir = fresh_dir("changed");
  const ScenarioOutcome first = run_scenario(config_in(dir));
  ScenarioConfig other = config_in(dir);
  other.propagator.dt = 0.25;  // same run id, different configuration
  const ScenarioOutcome second = run_scenario(other);
  CHECK(second.failed_io == 0);
  CHECK(second.manifest["config_hash"] != first.manifest["config_hash"]);
  CHECK(second.manifest["runs"][0]["status"] == "complete");
  CHECK(second.manifest["runs"][0]["total_steps"] < first.manifest["runs"][0]["total_steps"]);
  fs::remove_all(dir);
}

TEST_CASE("Unwritable output is an I/O error") {
  const fs::path dir = fresh_dir("blocked");
  fs::create_directories(dir);
  std::ofstream(dir / "file") << "x";
  CHECK_THROWS_AS(run_scenario(config_in(dir / "file" / "out")), IoError);
  fs::remove_all(dir);
}

TEST_CASE("CSV formatting round-trips doubles") {
  for (double x : {0.1, 1.0 / 3.0, 2e14, 1e-300}) CHECK(std::stod(format_exact(x)) == x);
  PopulationTrace t;
  t.labels = {"1sg.up", "1pu+.dn"};
  t.append(0.0, 0.0, {1.0, 1.0}, {0.0, 0.0});
  t.append(0.5, -0.25, {0.75, 0.5}, {0.0, 0.0});
  CHECK(trace_csv(t) == "time_au,E_t,N_1sg.up,N_1pu+.dn\n0,0,1,1\n0.5,-0.25,0.75,0.5\n");
  CHECK(yields_csv({}) == "intensity_Wcm2,wavelength_nm,molecule,occupation,P0,P1,P2plus\n");
}
