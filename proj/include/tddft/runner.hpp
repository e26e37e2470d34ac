#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "checkpoint.hpp"
#include "config.hpp"
#include "groundstate.hpp"
#include "observables.hpp"
#include "parallel.hpp"
#include "propagation.hpp"
#include "version.hpp"

namespace tddft {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Shortest decimal form that reads back bit for bit.
inline std::string format_exact(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string trace_csv(const PopulationTrace& trace) {
  std::string out = "time_au,E_t";
  for (const auto& l : trace.labels) out += ",N_" + l;
  out += '\n';
  for (std::size_t s = 0; s < trace.samples(); ++s) {
    out += format_exact(trace.times[s]) + "," + format_exact(trace.field[s]);
    for (double n : trace.bound[s]) out += "," + format_exact(n);
    out += '\n';
  }
  return out;
}

inline const char* yields_header = "intensity_Wcm2,wavelength_nm,molecule,occupation,P0,P1,P2plus";

inline std::string yields_csv(const std::vector<IonYieldRecord>& records) {
  std::string out = std::string(yields_header) + '\n';
  for (const auto& r : records)
    out += format_exact(r.intensity_wcm2) + "," + format_exact(r.wavelength_nm) + "," + r.molecule + "," +
           r.occupation + "," + format_exact(r.p0) + "," + format_exact(r.p1) + "," + format_exact(r.p2plus) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Scenario plan

/// One sweep point: a molecule in one spin state under one pulse with one
/// set of responding orbitals.
struct RunPlan {
  std::string id;
  std::string molecule;
  Multiplicity multiplicity = Multiplicity::singlet;
  LaserPulse pulse;
  FreezeSpec freeze;
};

inline std::string ground_key(const std::string& molecule, Multiplicity m) {
  return molecule + "-" + to_string(m);
}

inline std::vector<RunPlan> plan_runs(const ScenarioConfig& c) {
  std::vector<RunPlan> plans;
  char buf[64];
  for (const auto& mol : c.molecules)
    for (Multiplicity mult : c.multiplicities_for(mol))
      for (double wl : c.wavelengths)
        for (double intensity : c.intensities)
          for (const FreezeSpec& f : c.freeze) {
            RunPlan p;
            p.molecule = mol;
            p.multiplicity = mult;
            p.pulse = c.pulse;
            p.pulse.intensity_wcm2 = intensity;
            p.pulse.wavelength_nm = wl;
            p.freeze = f;
            std::snprintf(buf, sizeof buf, "-I%.4g-%gnm-", intensity, wl);
            p.id = ground_key(mol, mult) + buf + f.tag();
            plans.push_back(std::move(p));
          }
  return plans;
}

/// Ionisation potentials the summary compares against (eV).
inline std::optional<double> reference_ip(const std::string& molecule) {
  if (molecule == "N2") return 15.91;
  if (molecule == "O2") return 11.45;
  if (molecule == "F2") return 14.14;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Manifest

/// In-memory view of manifest.json. Updates go through one mutex and every
/// update rewrites the file, so a killed process leaves a consistent record.
class Manifest {
 public:
  Manifest(fs::path dir, json doc) : dir_(std::move(dir)), doc_(std::move(doc)) {}

  static std::optional<json> read(const fs::path& dir) {
    const fs::path p = dir / "manifest.json";
    if (!fs::exists(p)) return std::nullopt;
    try {
      return json::parse(checkpoint::read_file(p));
    } catch (const json::exception& e) {
      throw IoError("corrupt manifest " + p.string() + ": " + e.what());
    }
  }

  template <typename Fn>
  void update(Fn&& fn) {
    std::lock_guard<std::mutex> g(lock_);
    fn(doc_);
    refresh_artifacts();
    checkpoint::write_file(dir_ / "manifest.json", doc_.dump(2) + "\n");
  }

  json snapshot() const {
    std::lock_guard<std::mutex> g(lock_);
    return doc_;
  }

 private:
  void refresh_artifacts() {
    std::set<std::string> files;
    for (const auto& g : doc_["ground_states"])
      for (const auto& [k, v] : g["artifacts"].items()) files.insert(v.get<std::string>());
    for (const auto& r : doc_["runs"])
      for (const auto& [k, v] : r["artifacts"].items()) files.insert(v.get<std::string>());
    for (const auto& [k, v] : doc_["reports"].items()) files.insert(v.get<std::string>());
    doc_["artifacts"] = json(files);
  }

  fs::path dir_;
  json doc_;
  mutable std::mutex lock_;
};

// ---------------------------------------------------------------------------
// Execution

struct RunOptions {
  int threads = 1;
  /// Stop every run after this many steps (status "incomplete"); -1 runs to the end.
  long step_limit = -1;
  /// Only solve the ground states and ionisation potentials.
  bool ground_only = false;
  /// Progress messages; may be empty.
  std::function<void(const std::string&)> log;
};

struct ScenarioOutcome {
  json manifest;
  /// Runs that ended in a numerical failure or an I/O failure.
  int failed_numerical = 0;
  int failed_io = 0;
  std::string first_error;
};

namespace runner_detail {

inline void write_text(const fs::path& path, const std::string& text) { checkpoint::write_file(path, text); }

inline json ground_record(const std::string& key, const std::string& molecule, Multiplicity mult) {
  return json{{"key", key},
              {"molecule", molecule},
              {"multiplicity", to_string(mult)},
              {"status", "pending"},
              {"artifacts", json::object()}};
}

inline json run_record(const RunPlan& p, long total_steps) {
  return json{{"id", p.id},
              {"molecule", p.molecule},
              {"multiplicity", to_string(p.multiplicity)},
              {"intensity_wcm2", p.pulse.intensity_wcm2},
              {"wavelength_nm", p.pulse.wavelength_nm},
              {"freeze", p.freeze.tag()},
              {"status", "pending"},
              {"steps_done", 0},
              {"total_steps", total_steps},
              {"artifacts", json::object()}};
}

template <typename Json>
Json& find_by(Json& list, const char* field, const std::string& value) {
  for (auto& item : list)
    if (item.at(field) == value) return item;
  throw std::logic_error("manifest has no entry " + value);
}

inline std::string occupation_tag(const RunPlan& p) {
  std::string tag = to_string(p.multiplicity);
  if (!p.freeze.active.empty()) tag += "[" + p.freeze.tag() + "]";
  return tag;
}

}  // namespace runner_detail

/// Text tables: ionisation potentials, ion yields by intensity and the
/// strong-field diagnostics of every completed run.
inline std::string summary_text(const json& manifest) {
  std::ostringstream o;
  char buf[256];
  o << "Scenario " << manifest.value("config_hash", std::string("?")) << " ("
    << manifest.value("preset", std::string("?")) << " preset, " << manifest.value("code_version", std::string("?"))
    << ")\n\n";

  o << "Ionization potentials (Delta-SCF, eV)\n";
  std::snprintf(buf, sizeof buf, "  %-14s %10s %10s %10s\n", "molecule", "computed", "reference", "diff");
  o << buf;
  for (const auto& g : manifest["ground_states"]) {
    if (g["status"] != "complete") {
      std::snprintf(buf, sizeof buf, "  %-14s %10s\n", g["key"].get<std::string>().c_str(),
                    g["status"].get<std::string>().c_str());
      o << buf;
      continue;
    }
    const double ip = g["ionization_potential_ev"];
    const auto ref = reference_ip(g["molecule"].get<std::string>());
    if (ref)
      std::snprintf(buf, sizeof buf, "  %-14s %10.2f %10.2f %+10.2f\n", g["key"].get<std::string>().c_str(), ip,
                    *ref, ip - *ref);
    else
      std::snprintf(buf, sizeof buf, "  %-14s %10.2f %10s %10s\n", g["key"].get<std::string>().c_str(), ip, "-",
                    "-");
    o << buf;
  }

  // Yield table: one row per (wavelength, intensity), one column per series.
  std::vector<std::string> series;
  std::map<std::pair<double, double>, std::map<std::string, double>> rows;
  for (const auto& r : manifest["runs"]) {
    if (r["status"] != "complete") continue;
    std::string s = r["molecule"].get<std::string>();
    if (r["multiplicity"] != "singlet" || r["molecule"] == "O2") s += " " + r["multiplicity"].get<std::string>();
    if (r["freeze"] != "all") s += " [" + r["freeze"].get<std::string>() + "]";
    if (std::find(series.begin(), series.end(), s) == series.end()) series.push_back(s);
    rows[{r["wavelength_nm"].get<double>(), r["intensity_wcm2"].get<double>()}][s] = r["yield"]["P1"];
  }
  if (!rows.empty()) {
    o << "\nIon yields P1 at the end of the pulse\n";
    std::snprintf(buf, sizeof buf, "  %-8s %-12s", "nm", "I (W/cm^2)");
    o << buf;
    for (const auto& s : series) {
      std::snprintf(buf, sizeof buf, " %16s", s.c_str());
      o << buf;
    }
    o << "\n";
    for (const auto& [key, values] : rows) {
      std::snprintf(buf, sizeof buf, "  %-8g %-12.3g", key.first, key.second);
      o << buf;
      for (const auto& s : series) {
        const auto it = values.find(s);
        if (it == values.end()) std::snprintf(buf, sizeof buf, " %16s", "-");
        else std::snprintf(buf, sizeof buf, " %16.7f", it->second);
        o << buf;
      }
      o << "\n";
    }

    o << "\nStrong-field parameters\n";
    std::snprintf(buf, sizeof buf, "  %-34s %8s %8s %6s %8s\n", "run", "U_p", "gamma", "N", "k_N R");
    o << buf;
    for (const auto& r : manifest["runs"]) {
      if (r["status"] != "complete" || !r.contains("diagnostics")) continue;
      const auto& d = r["diagnostics"];
      const std::string knr = d["k_n_r"].is_null() ? std::string("closed") : format_exact(d["k_n_r"]).substr(0, 6);
      std::snprintf(buf, sizeof buf, "  %-34s %8.4f %8.3f %6d %8s\n", r["id"].get<std::string>().c_str(),
                    d["up"].get<double>(), d["gamma"].get<double>(), d["photons"].get<int>(), knr.c_str());
      o << buf;
    }
  }

  int incomplete = 0;
  for (const auto& r : manifest["runs"]) incomplete += r["status"] != "complete";
  if (incomplete > 0) o << "\n" << incomplete << " run(s) not complete\n";
  return o.str();
}

/// Rewrites yields.csv and summary.txt from the manifest and records them.
/// With no runs, no files are written.
inline void write_reports(Manifest& manifest, const fs::path& dir) {
  json doc = manifest.snapshot();
  if (doc["runs"].empty()) return;
  std::vector<IonYieldRecord> yields;
  for (const auto& r : doc["runs"]) {
    if (r["status"] != "complete") continue;
    IonYieldRecord y;
    y.intensity_wcm2 = r["intensity_wcm2"];
    y.wavelength_nm = r["wavelength_nm"];
    y.molecule = r["molecule"];
    y.occupation = r["yield"]["occupation"];
    y.p0 = r["yield"]["P0"];
    y.p1 = r["yield"]["P1"];
    y.p2plus = r["yield"]["P2plus"];
    yields.push_back(y);
  }
  runner_detail::write_text(dir / "yields.csv", yields_csv(yields));
  manifest.update([&](json& m) { m["reports"]["yields"] = "yields.csv"; });
  runner_detail::write_text(dir / "summary.txt", summary_text(manifest.snapshot()));
  manifest.update([&](json& m) { m["reports"]["summary"] = "summary.txt"; });
}

/// Runs every sweep point of the scenario into `config.output`.
///
/// Ground states are solved once per molecule and spin state (or loaded from
/// their checkpoints), then the runs execute concurrently. A run already
/// marked complete in a manifest with the same configuration hash is not
/// recomputed; a run with a propagation checkpoint continues from it.
/// Numerical and I/O failures of one run are recorded in the manifest and
/// counted in the outcome; the other runs proceed.
inline ScenarioOutcome run_scenario(const ScenarioConfig& config, const RunOptions& options = {}) {
  validate_config(config);
  const fs::path dir = config.output;
  const std::string hash = config_hash(config);
  auto log = [&](const std::string& s) {
    if (options.log) options.log(s);
  };
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  const std::vector<RunPlan> plans = plan_runs(config);
  const Grid grid(config.grid);

  json doc;
  if (auto old = Manifest::read(dir); old && (*old)["config_hash"] == hash) {
    doc = *old;
    log("manifest hit for configuration " + hash);
  } else {
    doc = json{{"config_hash", hash},
               {"code_version", std::string("tddft ") + version_string},
               {"preset", config.preset},
               {"config", serialize_config(config)},
               {"ground_states", json::array()},
               {"runs", json::array()},
               {"reports", json::object()},
               {"artifacts", json::array()}};
    if (!plans.empty()) {
      std::set<std::string> keys;
      for (const auto& p : plans)
        if (keys.insert(ground_key(p.molecule, p.multiplicity)).second)
          doc["ground_states"].push_back(
              runner_detail::ground_record(ground_key(p.molecule, p.multiplicity), p.molecule, p.multiplicity));
      for (const auto& p : plans) {
        const long steps = static_cast<long>(std::ceil(p.pulse.duration() / config.propagator.dt - 1e-9));
        doc["runs"].push_back(runner_detail::run_record(p, steps));
      }
    }
  }
  Manifest manifest(dir, doc);
  manifest.update([](json&) {});
  ScenarioOutcome outcome;
  if (plans.empty()) {
    outcome.manifest = manifest.snapshot();
    return outcome;
  }

  // Ground states and ionisation potentials.
  struct Ground {
    std::string key;
    std::string molecule;
    Multiplicity multiplicity;
    std::vector<Nucleus> nuclei;
    GroundState state;
  };
  std::vector<Ground> grounds;
  for (const auto& g : doc["ground_states"]) {
    const MoleculeSpec mol = config.molecule(g["molecule"]);
    const auto nuc = mol.nuclei();
    grounds.push_back({g["key"], g["molecule"], parse_multiplicity(g["multiplicity"]),
                       std::vector<Nucleus>(nuc.begin(), nuc.end()), {}});
  }
  ScfParams scf = config.scf;
  scf.seed = config.seed;
  scf.threads = std::max(1, options.threads / static_cast<int>(grounds.size()));
  parallel_for(static_cast<int>(grounds.size()), options.threads, [&](int i) {
    Ground& g = grounds[i];
    const std::string neutral_file = "ground/" + g.key + ".ckpt";
    const std::string cation_file = "ground/" + g.key + "-cation.ckpt";
    const json& rec = runner_detail::find_by(std::as_const(doc).at("ground_states"), "key", g.key);
    const KohnShamModel model(grid, g.nuclei, scf.interacting, scf.hartree);
    if (rec["status"] == "complete" && fs::exists(dir / neutral_file)) {
      g.state = load_ground_state(dir / neutral_file);
      log("ground state " + g.key + " loaded from checkpoint");
      return;
    }
    log("solving ground state " + g.key);
    const auto started = std::chrono::steady_clock::now();
    const OccupationSpec occ = config.occupation(g.molecule, g.multiplicity);
    g.state = scf_solve(model, occ, scf);
    save_ground_state(dir / neutral_file, g.state);
    const OccupationSpec cation_occ = config.cation.empty()
                                          ? remove_spin_orbital(occ, g.state.homo())
                                          : parse_configuration(config.cation, Multiplicity::doublet);
    // A bare cation (H2+ ionised) has only the nuclear repulsion left.
    GroundState cation;
    cation.total_energy = nuclear_repulsion(std::span<const Nucleus>(g.nuclei));
    if (cation_occ.electron_count() > 0) {
      cation = scf_solve(model, cation_occ, scf, &g.state);
      save_ground_state(dir / cation_file, cation);
    }
    const double ip = units::hartree_to_ev(cation.total_energy - g.state.total_energy);
    log("  " + g.key + ": I_p = " + format_exact(ip) + " eV");
    manifest.update([&](json& m) {
      json& r = runner_detail::find_by(m["ground_states"], "key", g.key);
      r["status"] = "complete";
      r["total_energy"] = g.state.total_energy;
      r["cation_energy"] = cation.total_energy;
      r["ionization_potential_ev"] = ip;
      r["scf_iterations"] = g.state.iterations;
      r["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      r["homo"] = spin_orbital_name(occ.entries[g.state.homo()]);
      json energies = json::object();
      for (std::size_t k = 0; k < occ.entries.size(); ++k)
        energies[spin_orbital_name(occ.entries[k])] = g.state.energies[k];
      r["orbital_energies"] = energies;
      r["artifacts"] = {{"neutral", neutral_file}};
      if (cation_occ.electron_count() > 0) r["artifacts"]["cation"] = cation_file;
    });
  });
  if (options.ground_only) {
    outcome.manifest = manifest.snapshot();
    return outcome;
  }

  const json current = manifest.snapshot();
  std::map<std::string, double> ips;
  for (const auto& g : current["ground_states"]) ips[g["key"]] = g["ionization_potential_ev"];
  std::vector<int> todo;
  for (std::size_t i = 0; i < plans.size(); ++i)
    if (current["runs"][i]["status"] != "complete") todo.push_back(static_cast<int>(i));
  if (todo.empty()) log("all runs complete; nothing to do");
  const int outer = std::clamp(options.threads, 1, std::max(1, static_cast<int>(todo.size())));
  const int inner = std::max(1, options.threads / outer);
  std::mutex error_lock;

  parallel_for(static_cast<int>(todo.size()), outer, [&](int t) {
    const RunPlan& plan = plans[todo[t]];
    const Ground& ground = *std::find_if(grounds.begin(), grounds.end(), [&](const Ground& g) {
      return g.key == ground_key(plan.molecule, plan.multiplicity);
    });
    const std::string run_dir = "runs/" + plan.id;
    const std::string ckpt_file = run_dir + "/state.ckpt";
    const std::string trace_file = run_dir + "/trace.csv";
    const std::string tag = hash + ":" + plan.id;
    // Wall time accumulates over resumed sessions.
    auto started = std::chrono::steady_clock::now();
    auto set_status = [&](const std::string& status, const std::function<void(json&)>& extra = {}) {
      manifest.update([&](json& m) {
        json& r = runner_detail::find_by(m["runs"], "id", plan.id);
        r["status"] = status;
        const auto now = std::chrono::steady_clock::now();
        r["wall_seconds"] = r.value("wall_seconds", 0.0) + std::chrono::duration<double>(now - started).count();
        started = now;
        if (extra) extra(r);
      });
    };
    try {
      const KohnShamModel model(grid, ground.nuclei, config.scf.interacting, config.scf.hartree);
      const OccupationSpec& occ = ground.state.occupation;
      const Propagator prop(model, ground.state, plan.pulse, config.propagator, plan.freeze.mask(occ), config.box,
                            config.observe_every, inner);
      PropagationState state;
      // Checkpoints left by a different scenario in the same directory are
      // overwritten; only runs this manifest has started are resumed.
      if (current["runs"][todo[t]]["status"] != "pending" && fs::exists(dir / ckpt_file)) {
        state = load_propagation(dir / ckpt_file, tag);
        log("run " + plan.id + ": resuming at step " + std::to_string(state.step));
      } else {
        state = prop.initial_state();
        log("run " + plan.id + ": starting, " + std::to_string(prop.total_steps()) + " steps");
      }
      set_status("running");
      const long until = options.step_limit < 0 ? -1 : state.step + options.step_limit;
      prop.run(state, until, [&](const PropagationState& s) {
        save_propagation(dir / ckpt_file, s, tag);
        set_status("running", [&](json& r) {
          r["steps_done"] = s.step;
          r["artifacts"]["checkpoint"] = ckpt_file;
        });
      });
      save_propagation(dir / ckpt_file, state, tag);
      if (state.step < prop.total_steps()) {
        set_status("incomplete", [&](json& r) {
          r["steps_done"] = state.step;
          r["artifacts"]["checkpoint"] = ckpt_file;
        });
        log("run " + plan.id + ": stopped at step " + std::to_string(state.step));
        return;
      }
      runner_detail::write_text(dir / trace_file, trace_csv(state.trace));
      const IonYieldRecord y =
          ion_yield(state.trace, plan.pulse, plan.molecule, runner_detail::occupation_tag(plan));
      const double ip_now = units::ev_to_hartree(ips.at(ground.key));
      set_status("complete", [&](json& r) {
        r["steps_done"] = state.step;
        r["artifacts"] = {{"trace", trace_file}, {"checkpoint", ckpt_file}};
        r["yield"] = {{"occupation", y.occupation}, {"P0", y.p0}, {"P1", y.p1}, {"P2plus", y.p2plus},
                      {"P1_max", y.p1_max}};
        r["krylov"] = {{"substeps", state.krylov.substeps}, {"matvecs", state.krylov.matvecs},
                       {"max_error", state.krylov.error}};
        if (plan.pulse.intensity_wcm2 > 0.0 && ip_now > 0.0) {
          const DiagnosticParams d = diagnostics(ip_now, plan.pulse, config.molecule(plan.molecule).bond_length);
          r["diagnostics"] = {{"ip", d.ip},       {"up", d.up},     {"omega", d.omega},
                              {"gamma", d.gamma}, {"photons", d.photons},
                              {"k_n_r", d.k_n_r ? json(*d.k_n_r) : json(nullptr)}};
        }
      });
      log("run " + plan.id + ": P1 = " + format_exact(y.p1));
    } catch (const NumericalError& e) {
      set_status("failed", [&](json& r) { r["error"] = e.what(); });
      std::lock_guard<std::mutex> g(error_lock);
      ++outcome.failed_numerical;
      if (outcome.first_error.empty()) outcome.first_error = plan.id + ": " + e.what();
    } catch (const IoError& e) {
      std::lock_guard<std::mutex> g(error_lock);
      ++outcome.failed_io;
      if (outcome.first_error.empty()) outcome.first_error = plan.id + ": " + e.what();
      try {
        set_status("io_error", [&](json& r) { r["error"] = e.what(); });
      } catch (const IoError&) {
      }
    }
  });

  write_reports(manifest, dir);
  outcome.manifest = manifest.snapshot();
  return outcome;
}

/// Reads the scenario stored in an output directory's manifest.
inline ScenarioConfig stored_config(const fs::path& dir) {
  const auto doc = Manifest::read(dir);
  if (!doc) throw IoError("no manifest.json in " + dir.string());
  ScenarioConfig c = parse_config((*doc)["config"].get<std::string>());
  c.output = dir.string();
  return c;
}

/// Regenerates yields.csv and summary.txt from an existing manifest.
inline std::string regenerate_reports(const fs::path& dir) {
  const auto doc = Manifest::read(dir);
  if (!doc) throw IoError("no manifest.json in " + dir.string());
  Manifest manifest(dir, *doc);
  write_reports(manifest, dir);
  return summary_text(manifest.snapshot());
}

}  // namespace tddft
