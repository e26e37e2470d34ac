#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "grid.hpp"
#include "groundstate.hpp"
#include "observables.hpp"
#include "occupation.hpp"
#include "potentials.hpp"
#include "propagation.hpp"

namespace tddft {

/// Invalid configuration; `line` is 0 when no single line is to blame.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(int line, const std::string& message)
      : std::invalid_argument(line > 0 ? "config:" + std::to_string(line) + ": " + message
                                       : "config: " + message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Orbitals that respond to the field; an empty list means all of them.
struct FreezeSpec {
  std::vector<std::string> active;

  std::string tag() const {
    if (active.empty()) return "all";
    std::string s;
    for (const auto& l : active) s += (s.empty() ? "" : "+") + l;
    return s;
  }

  FreezeMask mask(const OccupationSpec& occ) const {
    return active.empty() ? FreezeMask::all_active(occ.entries.size()) : FreezeMask::only(occ, active);
  }

  bool operator==(const FreezeSpec&) const = default;
};

/// A scenario: one grid and numerical setup, swept over molecules,
/// multiplicities, intensities, wavelengths and freeze masks.
struct ScenarioConfig {
  std::string preset = "production";
  std::string output = "out";
  int observe_every = 50;
  unsigned seed = 12345;

  std::vector<std::string> molecules = {"N2"};
  /// Overrides the preset bond length; only valid for a single molecule.
  std::optional<double> bond_length;
  /// Shell list such as "1sg2 1su2 2sg2 2su2 1pu4 3sg2"; empty uses the
  /// molecule's ground configuration.
  std::string configuration;
  /// Empty uses each molecule's ground multiplicity.
  std::vector<Multiplicity> multiplicities;
  /// Cation shell list for the ionisation potential; empty removes the HOMO.
  std::string cation;

  GridSpec grid{2291, 0.05, 43, 0.28838771, 2};
  ScfParams scf;
  LaserPulse pulse{390.0, 1e14, 24.0};
  std::vector<double> intensities = {1e14};
  std::vector<double> wavelengths = {390.0};
  PropagatorSpec propagator;
  AnalysisBox box;
  std::vector<FreezeSpec> freeze = {FreezeSpec{}};

  /// Source lines of the keys, for anchoring cross-checks.
  std::map<std::string, int> lines;

  int line_of(const std::string& key) const {
    const auto it = lines.find(key);
    return it == lines.end() ? 0 : it->second;
  }

  std::vector<Multiplicity> multiplicities_for(const std::string& molecule) const {
    return multiplicities.empty() ? std::vector<Multiplicity>{default_multiplicity(molecule)} : multiplicities;
  }

  MoleculeSpec molecule(const std::string& name) const {
    MoleculeSpec m = molecule_preset(name);
    if (bond_length) m.bond_length = *bond_length;
    return m;
  }

  OccupationSpec occupation(const std::string& molecule, Multiplicity mult) const {
    return configuration.empty() ? occupation_preset(molecule, mult)
                                 : parse_configuration(configuration, mult);
  }

  std::size_t run_count() const {
    std::size_t n = 0;
    for (const auto& m : molecules) n += multiplicities_for(m).size();
    return n * intensities.size() * wavelengths.size() * freeze.size();
  }

  bool operator==(const ScenarioConfig& o) const {
    auto strip = [](ScenarioConfig c) {
      c.lines.clear();
      return c;
    };
    return physics_equal(strip(*this), strip(o));
  }

 private:
  static bool physics_equal(const ScenarioConfig& a, const ScenarioConfig& b) {
    return a.preset == b.preset && a.output == b.output && a.observe_every == b.observe_every &&
           a.seed == b.seed && a.molecules == b.molecules && a.bond_length == b.bond_length &&
           a.configuration == b.configuration && a.multiplicities == b.multiplicities &&
           a.cation == b.cation && a.grid == b.grid && a.scf.mixing == b.scf.mixing &&
           a.scf.max_iterations == b.scf.max_iterations &&
           a.scf.energy_tolerance == b.scf.energy_tolerance &&
           a.scf.density_tolerance == b.scf.density_tolerance &&
           a.scf.eigen_tolerance == b.scf.eigen_tolerance && a.scf.interacting == b.scf.interacting && a.pulse == b.pulse &&
           a.intensities == b.intensities && a.wavelengths == b.wavelengths &&
           a.propagator == b.propagator && a.box == b.box && a.freeze == b.freeze;
  }
};

/// Paper-scale numerics: the N_z = 2291 grid, dt = 0.02, 24-cycle pulses.
inline void apply_production_preset(ScenarioConfig& c) {
  c.preset = "production";
  c.grid = GridSpec{2291, 0.05, 43, 0.28838771, 2};
  c.pulse.n_cycles = 24.0;
  c.propagator.dt = 0.02;
  c.propagator.krylov_order = 18;
  c.propagator.absorber = AbsorberSpec{};
  c.box = AnalysisBox{20.0, 12.0};
  c.observe_every = 50;
}

/// Reduced scale for a single desktop core: |z| <= 20 bohr with a
/// second-order z stencil, 16 radial nodes, 6-cycle pulses, dt = 0.1 and a
/// 150 hartree cap on the radial kinetic spectrum.
inline void apply_desk_preset(ScenarioConfig& c) {
  c.preset = "desk";
  c.grid = GridSpec{571, 0.07, 16, 0.5, 1};
  c.grid.rho_kinetic_cap = 150.0;
  c.pulse.n_cycles = 6.0;
  c.propagator.dt = 0.1;
  c.propagator.krylov_order = 18;
  c.propagator.absorber = AbsorberSpec{};
  c.propagator.absorber.rho_onset = 10.0;
  c.box = AnalysisBox{12.0, 8.0};
  c.observe_every = 10;
}

inline void apply_preset(ScenarioConfig& c, const std::string& name, int line = 0) {
  if (name == "production") apply_production_preset(c);
  else if (name == "desk") apply_desk_preset(c);
  else throw ConfigError(line, "unknown preset '" + name + "' (expected desk or production)");
}

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

inline double to_double(const std::string& v, int line, const std::string& key) {
  double x = 0.0;
  const char* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end || !std::isfinite(x))
    throw ConfigError(line, key + ": expected a number, got '" + v + "'");
  return x;
}

inline long to_long(const std::string& v, int line, const std::string& key) {
  long x = 0;
  const char* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) throw ConfigError(line, key + ": expected an integer, got '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& v, int line, const std::string& key) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError(line, key + ": expected true or false, got '" + v + "'");
}

inline std::vector<double> to_doubles(const std::string& v, int line, const std::string& key) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(item, line, key));
  return out;
}

/// Shortest text that reads back to the same double.
inline std::string format(double x) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ", ") + format(x);
  return s;
}

}  // namespace config_detail

/// Parses the sectioned key = value format described in docs/config.md.
/// `preset_override` (from the command line) wins over a [run] preset key.
inline ScenarioConfig parse_config(const std::string& text, const std::string& preset_override = "") {
  using namespace config_detail;
  struct Entry {
    std::string value;
    int line;
  };
  std::map<std::string, Entry> entries;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(line, "unterminated section header '" + s + "'");
      section = trim(s.substr(1, s.size() - 2));
      static const std::vector<std::string> known = {"run",   "molecule",   "occupation", "grid",
                                                     "scf",   "pulse",      "sweep",      "propagator",
                                                     "absorber", "box",     "freeze"};
      if (std::find(known.begin(), known.end(), section) == known.end())
        throw ConfigError(line, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected 'key = value', got '" + s + "'");
    if (section.empty()) throw ConfigError(line, "key outside of any [section]");
    const std::string key = section + "." + trim(s.substr(0, eq));
    if (entries.count(key)) throw ConfigError(line, "duplicate key " + key);
    entries[key] = {trim(s.substr(eq + 1)), line};
  }

  ScenarioConfig c;
  const std::string preset = !preset_override.empty() ? preset_override
                             : entries.count("run.preset") ? entries["run.preset"].value
                                                           : "production";
  apply_preset(c, preset, entries.count("run.preset") ? entries["run.preset"].line : 0);

  for (const auto& [key, entry] : entries) {
    const std::string& v = entry.value;
    const int ln = entry.line;
    c.lines[key] = ln;
    auto num = [&] { return to_double(v, ln, key); };
    auto integer = [&] { return to_long(v, ln, key); };
    auto positive_int = [&] {
      const long x = integer();
      if (x < 1 || x > 1000000000) throw ConfigError(ln, key + ": expected a positive integer");
      return static_cast<int>(x);
    };
    auto mults = [&] {
      std::vector<Multiplicity> out;
      for (const auto& s : split(v, ',')) {
        try {
          out.push_back(parse_multiplicity(s));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(ln, key + ": " + e.what());
        }
      }
      return out;
    };

    if (key == "run.preset") continue;
    else if (key == "run.output") c.output = v;
    else if (key == "run.observe_every") c.observe_every = positive_int();
    else if (key == "run.seed") c.seed = static_cast<unsigned>(integer());
    else if (key == "molecule.name" || key == "sweep.molecules") {
      c.molecules.clear();
      for (const auto& s : split(v, ',')) {
        try {
          molecule_preset(s);
        } catch (const std::invalid_argument&) {
          throw ConfigError(ln, key + ": unknown molecule '" + s + "' (N2, O2, F2 or H2+)");
        }
        c.molecules.push_back(s);
      }
    } else if (key == "molecule.bond_length") c.bond_length = num();
    else if (key == "occupation.configuration") c.configuration = v;
    else if (key == "occupation.multiplicity" || key == "sweep.multiplicities") c.multiplicities = mults();
    else if (key == "occupation.cation") c.cation = v;
    else if (key == "grid.n_z") c.grid.n_z = positive_int();
    else if (key == "grid.dz") c.grid.dz = num();
    else if (key == "grid.n_rho") c.grid.n_rho = positive_int();
    else if (key == "grid.h_rho") c.grid.h_rho = num();
    else if (key == "grid.fd_order") c.grid.fd_order = positive_int();
    else if (key == "grid.rho_kinetic_cap") c.grid.rho_kinetic_cap = num();
    else if (key == "scf.mixing") c.scf.mixing = num();
    else if (key == "scf.max_iterations") c.scf.max_iterations = positive_int();
    else if (key == "scf.energy_tolerance") c.scf.energy_tolerance = num();
    else if (key == "scf.density_tolerance") c.scf.density_tolerance = num();
    else if (key == "scf.eigen_tolerance") c.scf.eigen_tolerance = num();
    else if (key == "scf.interacting") c.scf.interacting = to_bool(v, ln, key);
    else if (key == "pulse.wavelength_nm" || key == "sweep.wavelengths_nm") c.wavelengths = to_doubles(v, ln, key);
    else if (key == "pulse.intensity_wcm2" || key == "sweep.intensities_wcm2") c.intensities = to_doubles(v, ln, key);
    else if (key == "pulse.n_cycles") c.pulse.n_cycles = num();
    else if (key == "pulse.envelope") {
      if (v == "sin2") c.pulse.envelope = Envelope::sin2;
      else if (v == "trapezoid") c.pulse.envelope = Envelope::trapezoid;
      else throw ConfigError(ln, key + ": expected sin2 or trapezoid, got '" + v + "'");
    } else if (key == "pulse.ramp_cycles") c.pulse.ramp_cycles = num();
    else if (key == "propagator.dt") c.propagator.dt = num();
    else if (key == "propagator.krylov_order") c.propagator.krylov_order = positive_int();
    else if (key == "propagator.scheme") {
      try {
        c.propagator.scheme = parse_update_scheme(v);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(ln, key + ": " + e.what());
      }
    } else if (key == "propagator.krylov_tolerance") c.propagator.krylov_tolerance = num();
    else if (key == "absorber.enabled") c.propagator.absorber.enabled = to_bool(v, ln, key);
    else if (key == "absorber.z_onset") c.propagator.absorber.z_onset = num();
    else if (key == "absorber.rho_onset") c.propagator.absorber.rho_onset = num();
    else if (key == "absorber.exponent") c.propagator.absorber.exponent = num();
    else if (key == "box.z_half_extent") c.box.z_half_extent = num();
    else if (key == "box.rho_extent") c.box.rho_extent = num();
    else if (key == "freeze.active" || key == "sweep.freeze") {
      c.freeze.clear();
      for (const auto& mask : split(v, ';')) {
        FreezeSpec f;
        if (mask != "all")
          for (const auto& l : split(mask, ','))
            if (!l.empty()) f.active.push_back(l);
        c.freeze.push_back(f);
      }
    } else {
      throw ConfigError(ln, "unknown key '" + key.substr(key.find('.') + 1) + "' in [" +
                                key.substr(0, key.find('.')) + "]");
    }
  }
  if (!c.intensities.empty()) c.pulse.intensity_wcm2 = c.intensities.front();
  if (!c.wavelengths.empty()) c.pulse.wavelength_nm = c.wavelengths.front();
  return c;
}

/// Cross-checks the whole scenario; throws ConfigError anchored at the
/// offending key where there is one.
inline void validate_config(const ScenarioConfig& c) {
  auto check = [&](const char* key, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(c.line_of(key), e.what());
    }
  };
  check("grid.n_z", [&] { c.grid.validate(); });
  check("scf.mixing", [&] { c.scf.validate(); });
  check("propagator.dt", [&] { c.propagator.validate(); });
  check("box.z_half_extent", [&] { c.box.validate(); });
  if (c.molecules.empty()) throw ConfigError(c.line_of("molecule.name"), "no molecule given");
  if (c.bond_length && c.molecules.size() > 1)
    throw ConfigError(c.line_of("molecule.bond_length"), "bond_length override needs a single molecule");
  if (c.bond_length && !(*c.bond_length > 0.0))
    throw ConfigError(c.line_of("molecule.bond_length"), "bond_length must be positive");
  for (double i : c.intensities)
    if (i < 0.0) throw ConfigError(c.line_of("pulse.intensity_wcm2"), "intensities must be >= 0");
  for (double w : c.wavelengths)
    if (!(w > 0.0)) throw ConfigError(c.line_of("pulse.wavelength_nm"), "wavelengths must be positive");
  check("pulse.n_cycles", [&] { c.pulse.validate(); });

  const Grid grid(c.grid);
  const int box_line = std::max(c.line_of("box.z_half_extent"), c.line_of("box.rho_extent"));
  try {
    c.box.validate(grid);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(box_line, std::string("box larger than the grid: ") + e.what());
  }
  try {
    Absorber(c.propagator.absorber, grid, c.box);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::max(c.line_of("absorber.z_onset"), c.line_of("absorber.rho_onset")), e.what());
  }

  for (const auto& name : c.molecules) {
    const MoleculeSpec mol = c.molecule(name);
    for (Multiplicity mult : c.multiplicities_for(name)) {
      OccupationSpec occ;
      try {
        occ = c.occupation(name, mult);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(c.line_of("occupation.configuration"), e.what());
      }
      const int want = name == "H2+" ? 1 : mol.electron_count();
      if (occ.electron_count() != want)
        throw ConfigError(c.line_of("occupation.configuration"),
                          "occupation holds " + std::to_string(occ.electron_count()) + " electrons but " +
                              name + " has " + std::to_string(want));
      if (!c.cation.empty()) {
        try {
          const OccupationSpec cat = parse_configuration(c.cation, Multiplicity::doublet);
          if (cat.electron_count() + 1 != occ.electron_count())
            throw ConfigError(c.line_of("occupation.cation"), "cation must hold one electron fewer");
        } catch (const ConfigError&) {
          throw;
        } catch (const std::invalid_argument& e) {
          throw ConfigError(c.line_of("occupation.cation"), e.what());
        }
      }
      for (const FreezeSpec& f : c.freeze) {
        for (const auto& l : f.active)
          if (std::none_of(occ.entries.begin(), occ.entries.end(), [&](const auto& e) { return e.label == l; }))
            throw ConfigError(c.line_of("freeze.active") ? c.line_of("freeze.active") : c.line_of("sweep.freeze"),
                              "freeze mask names " + l + ", which " + name + " does not occupy");
      }
    }
  }
}

/// Canonical text of a configuration: every key, fixed order, shortest
/// round-trip numbers. parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const ScenarioConfig& c) {
  using config_detail::format;
  using config_detail::join;
  std::ostringstream o;
  auto mults = [](const std::vector<Multiplicity>& v) {
    std::string s;
    for (auto m : v) s += (s.empty() ? "" : ", ") + std::string(to_string(m));
    return s;
  };
  std::string molecules;
  for (const auto& m : c.molecules) molecules += (molecules.empty() ? "" : ", ") + m;
  std::string freeze;
  for (const auto& f : c.freeze) {
    std::string mask = f.active.empty() ? "all" : "";
    for (const auto& l : f.active) mask += (mask.empty() ? "" : ", ") + l;
    freeze += (freeze.empty() ? "" : "; ") + mask;
  }
  o << "[run]\npreset = " << c.preset << "\noutput = " << c.output << "\nobserve_every = " << c.observe_every
    << "\nseed = " << c.seed << "\n\n";
  o << "[molecule]\nname = " << molecules << "\n";
  if (c.bond_length) o << "bond_length = " << format(*c.bond_length) << "\n";
  o << "\n[occupation]\n";
  if (!c.configuration.empty()) o << "configuration = " << c.configuration << "\n";
  if (!c.multiplicities.empty()) o << "multiplicity = " << mults(c.multiplicities) << "\n";
  if (!c.cation.empty()) o << "cation = " << c.cation << "\n";
  o << "\n[grid]\nn_z = " << c.grid.n_z << "\ndz = " << format(c.grid.dz) << "\nn_rho = " << c.grid.n_rho
    << "\nh_rho = " << format(c.grid.h_rho) << "\nfd_order = " << c.grid.fd_order
    << "\nrho_kinetic_cap = " << format(c.grid.rho_kinetic_cap) << "\n\n";
  o << "[scf]\nmixing = " << format(c.scf.mixing) << "\nmax_iterations = " << c.scf.max_iterations
    << "\nenergy_tolerance = " << format(c.scf.energy_tolerance)
    << "\ndensity_tolerance = " << format(c.scf.density_tolerance)
    << "\neigen_tolerance = " << format(c.scf.eigen_tolerance)
    << "\ninteracting = " << (c.scf.interacting ? "true" : "false") << "\n\n";
  o << "[pulse]\nwavelength_nm = " << join(c.wavelengths) << "\nintensity_wcm2 = " << join(c.intensities)
    << "\nn_cycles = " << format(c.pulse.n_cycles) << "\nenvelope = " << to_string(c.pulse.envelope)
    << "\nramp_cycles = " << format(c.pulse.ramp_cycles) << "\n\n";
  o << "[propagator]\ndt = " << format(c.propagator.dt) << "\nkrylov_order = " << c.propagator.krylov_order
    << "\nscheme = " << to_string(c.propagator.scheme)
    << "\nkrylov_tolerance = " << format(c.propagator.krylov_tolerance) << "\n\n";
  o << "[absorber]\nenabled = " << (c.propagator.absorber.enabled ? "true" : "false")
    << "\nz_onset = " << format(c.propagator.absorber.z_onset)
    << "\nrho_onset = " << format(c.propagator.absorber.rho_onset)
    << "\nexponent = " << format(c.propagator.absorber.exponent) << "\n\n";
  o << "[box]\nz_half_extent = " << format(c.box.z_half_extent) << "\nrho_extent = " << format(c.box.rho_extent)
    << "\n\n";
  o << "[freeze]\nactive = " << freeze << "\n";
  return o.str();
}

/// 64-bit FNV-1a of the canonical text without the output location, so the
/// hash ignores key order, comments and where results are written.
inline std::string config_hash(const ScenarioConfig& c) {
  ScenarioConfig copy = c;
  copy.output.clear();
  const std::string text = serialize_config(copy);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tddft
