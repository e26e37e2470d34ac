#pragma once

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"

namespace tddft {

enum class Multiplicity { singlet, doublet, triplet };

inline const char* to_string(Multiplicity m) {
  switch (m) {
    case Multiplicity::singlet: return "singlet";
    case Multiplicity::doublet: return "doublet";
    case Multiplicity::triplet: return "triplet";
  }
  return "?";
}

inline Multiplicity parse_multiplicity(const std::string& s) {
  if (s == "singlet") return Multiplicity::singlet;
  if (s == "doublet") return Multiplicity::doublet;
  if (s == "triplet") return Multiplicity::triplet;
  throw std::invalid_argument("unknown multiplicity '" + s + "'");
}

/// One occupied spin-orbital. `label` is the symmetry tag such as "3sg" or
/// "1pu" (ASCII for 3 sigma_g, 1 pi_u).
struct SpinOrbitalEntry {
  std::string label;
  int m = 0;
  Spin spin = Spin::up;
  int occupation = 1;

  bool operator==(const SpinOrbitalEntry&) const = default;
};

/// Column-safe name of a spin-orbital, e.g. "1pu+.up".
inline std::string spin_orbital_name(const SpinOrbitalEntry& e) {
  std::string name = e.label;
  if (e.m > 0) name += '+';
  if (e.m < 0) name += '-';
  name += e.spin == Spin::up ? ".up" : ".dn";
  return name;
}

struct OccupationSpec {
  std::vector<SpinOrbitalEntry> entries;
  Multiplicity multiplicity = Multiplicity::singlet;

  int electron_count() const {
    int n = 0;
    for (const auto& e : entries) n += e.occupation;
    return n;
  }

  int spin_count(Spin s) const {
    int n = 0;
    for (const auto& e : entries)
      if (e.spin == s) n += e.occupation;
    return n;
  }

  /// Occupied states needed in the channel (|m|, spin): the larger of the
  /// counts for +m and -m, since both signs share one spatial problem.
  int channel_count(int abs_m, Spin s) const {
    int plus = 0, minus = 0;
    for (const auto& e : entries) {
      if (e.spin != s || e.occupation == 0 || std::abs(e.m) != abs_m) continue;
      (e.m >= 0 ? plus : minus) += 1;
    }
    return std::max(plus, minus);
  }

  /// Position of entry i among the occupied entries of its (m, spin) list;
  /// this is the channel eigenstate it occupies.
  int state_index(std::size_t i) const {
    int idx = 0;
    for (std::size_t j = 0; j < i; ++j)
      if (entries[j].m == entries[i].m && entries[j].spin == entries[i].spin &&
          entries[j].occupation > 0)
        ++idx;
    return idx;
  }

  /// True when swapping spins maps the occupation onto itself.
  bool spin_symmetric() const {
    for (int am = 0; am <= 1; ++am)
      for (int sign : {1, -1}) {
        int up = 0, dn = 0;
        for (const auto& e : entries) {
          if (e.occupation == 0 || e.m != sign * am) continue;
          (e.spin == Spin::up ? up : dn) += 1;
        }
        if (up != dn) return false;
      }
    return true;
  }

  void validate() const {
    for (const auto& e : entries) {
      if (e.occupation != 0 && e.occupation != 1)
        throw std::invalid_argument("occupation: spin-orbital occupations must be 0 or 1");
      if (std::abs(e.m) > 1) throw std::invalid_argument("occupation: only |m| <= 1 supported");
      if (e.label.size() < 3) throw std::invalid_argument("occupation: bad label '" + e.label + "'");
      const char kind = e.label[e.label.size() - 2];
      if ((kind == 's') != (e.m == 0))
        throw std::invalid_argument("occupation: label " + e.label + " inconsistent with m");
    }
    for (std::size_t i = 0; i < entries.size(); ++i)
      for (std::size_t j = i + 1; j < entries.size(); ++j)
        if (entries[i].label == entries[j].label && entries[i].m == entries[j].m &&
            entries[i].spin == entries[j].spin)
          throw std::invalid_argument("occupation: spin-orbital " +
                                      spin_orbital_name(entries[i]) + " listed twice");
  }

  bool operator==(const OccupationSpec&) const = default;
};

/// Expands a shell list such as "1sg2 1su2 2sg2 2su2 1pu4 3sg2" into
/// spin-orbitals. Open pi shells follow the multiplicity: high spin puts
/// parallel spins into m = +1 and m = -1, singlet pairs spins in m = +1.
inline OccupationSpec parse_configuration(const std::string& text, Multiplicity mult) {
  OccupationSpec spec;
  spec.multiplicity = mult;
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    std::size_t pos = 0;
    while (pos < token.size() && std::isdigit(static_cast<unsigned char>(token[pos]))) ++pos;
    if (pos == 0 || token.size() < pos + 3)
      throw std::invalid_argument("configuration: cannot parse shell '" + token + "'");
    const std::string label = token.substr(0, pos + 2);
    const char kind = token[pos];
    const char parity = token[pos + 1];
    if ((kind != 's' && kind != 'p') || (parity != 'g' && parity != 'u'))
      throw std::invalid_argument("configuration: shell '" + token + "' must be n{s|p}{g|u}count");
    const int count = std::stoi(token.substr(pos + 2));
    if (kind == 's') {
      if (count < 1 || count > 2)
        throw std::invalid_argument("configuration: sigma shell holds 1 or 2 electrons");
      spec.entries.push_back({label, 0, Spin::up, 1});
      if (count == 2) spec.entries.push_back({label, 0, Spin::down, 1});
    } else {
      if (count < 1 || count > 4)
        throw std::invalid_argument("configuration: pi shell holds 1 to 4 electrons");
      const bool paired = mult == Multiplicity::singlet;
      const SpinOrbitalEntry high[4] = {{label, 1, Spin::up, 1},
                                        {label, -1, Spin::up, 1},
                                        {label, 1, Spin::down, 1},
                                        {label, -1, Spin::down, 1}};
      const SpinOrbitalEntry pair[4] = {{label, 1, Spin::up, 1},
                                        {label, 1, Spin::down, 1},
                                        {label, -1, Spin::up, 1},
                                        {label, -1, Spin::down, 1}};
      for (int i = 0; i < count; ++i) spec.entries.push_back(paired ? pair[i] : high[i]);
    }
  }
  spec.validate();
  return spec;
}

/// Ground configurations of the neutral molecules.
inline OccupationSpec occupation_preset(const std::string& molecule, Multiplicity mult) {
  if (molecule == "N2") return parse_configuration("1sg2 1su2 2sg2 2su2 1pu4 3sg2", mult);
  if (molecule == "O2") return parse_configuration("1sg2 1su2 2sg2 2su2 3sg2 1pu4 1pg2", mult);
  if (molecule == "F2") return parse_configuration("1sg2 1su2 2sg2 2su2 3sg2 1pu4 1pg4", mult);
  if (molecule == "H2+") return parse_configuration("1sg1", Multiplicity::doublet);
  throw std::invalid_argument("no occupation preset for '" + molecule + "'");
}

inline Multiplicity default_multiplicity(const std::string& molecule) {
  if (molecule == "O2") return Multiplicity::triplet;
  if (molecule == "H2+") return Multiplicity::doublet;
  return Multiplicity::singlet;
}

}  // namespace tddft
