#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "field.hpp"
#include "grid.hpp"
#include "units.hpp"

namespace tddft {

struct Nucleus {
  double charge = 0.0;
  double z = 0.0;
};

/// Homonuclear diatomic with nuclei at z = -R/2 and z = +R/2 on the axis.
struct MoleculeSpec {
  std::string name;
  int nuclear_charge = 0;
  double bond_length = 0.0;

  void validate() const {
    if (nuclear_charge < 1) throw std::invalid_argument("molecule: nuclear charge must be >= 1");
    if (!(bond_length > 0.0)) throw std::invalid_argument("molecule: bond length must be positive");
  }

  std::array<Nucleus, 2> nuclei() const {
    return {Nucleus{double(nuclear_charge), -0.5 * bond_length},
            Nucleus{double(nuclear_charge), 0.5 * bond_length}};
  }

  int electron_count() const { return 2 * nuclear_charge; }

  double nuclear_repulsion() const {
    return double(nuclear_charge) * nuclear_charge / bond_length;
  }

  bool operator==(const MoleculeSpec&) const = default;
};

/// Equilibrium geometries in bohr.
inline MoleculeSpec molecule_preset(const std::string& name) {
  if (name == "N2") return {"N2", 7, 2.074};
  if (name == "O2") return {"O2", 8, 2.282};
  if (name == "F2") return {"F2", 9, 2.668};
  if (name == "H2+") return {"H2+", 1, 2.0};
  throw std::invalid_argument("unknown molecule preset '" + name + "'");
}

inline double nuclear_repulsion(std::span<const Nucleus> nuclei) {
  double e = 0.0;
  for (std::size_t i = 0; i < nuclei.size(); ++i)
    for (std::size_t j = i + 1; j < nuclei.size(); ++j)
      e += nuclei[i].charge * nuclei[j].charge / std::abs(nuclei[i].z - nuclei[j].z);
  return e;
}

inline RealField eval_ionic(std::span<const Nucleus> nuclei, const Grid& grid) {
  RealField v = RealField::Zero(grid.n_z(), grid.n_rho());
  const auto& z = grid.z_points();
  const auto& rho = grid.rho_points();
  for (Eigen::Index k = 0; k < rho.size(); ++k)
    for (Eigen::Index a = 0; a < z.size(); ++a)
      for (const Nucleus& n : nuclei) v(a, k) -= n.charge / std::hypot(z(a) - n.z, rho(k));
  return v;
}

inline RealField eval_ionic(const MoleculeSpec& molecule, const Grid& grid) {
  molecule.validate();
  const auto nuclei = molecule.nuclei();
  return eval_ionic(std::span<const Nucleus>(nuclei), grid);
}

struct SpinDensity {
  RealField up;
  RealField down;

  RealField total() const { return up + down; }
  const RealField& operator[](Spin s) const { return s == Spin::up ? up : down; }
  RealField& operator[](Spin s) { return s == Spin::up ? up : down; }
};

namespace xlda {
inline const double potential_prefactor = std::cbrt(6.0 / units::pi);
inline const double energy_prefactor = 1.5 * std::cbrt(3.0 / (4.0 * units::pi));
}  // namespace xlda

/// Exchange-only LDA potential -(6/pi)^{1/3} n^{1/3}, applied pointwise.
inline RealField eval_xlda(const RealField& density_sigma) {
  return density_sigma.unaryExpr(
      [](double n) { return n > 0.0 ? -xlda::potential_prefactor * std::cbrt(n) : 0.0; });
}

inline std::pair<RealField, RealField> eval_xlda(const SpinDensity& density) {
  return {eval_xlda(density.up), eval_xlda(density.down)};
}

inline double exchange_energy(const SpinDensity& density, const Grid& grid) {
  auto four_thirds = [](double n) { return n > 0.0 ? n * std::cbrt(n) : 0.0; };
  return -xlda::energy_prefactor * (integrate(density.up.unaryExpr(four_thirds), grid) +
                                    integrate(density.down.unaryExpr(four_thirds), grid));
}

enum class Envelope { sin2, trapezoid };

inline const char* to_string(Envelope e) { return e == Envelope::sin2 ? "sin2" : "trapezoid"; }

/// Linearly polarised pulse along the molecular axis, length gauge.
struct LaserPulse {
  double wavelength_nm = 390.0;
  double intensity_wcm2 = 0.0;
  double n_cycles = 24.0;
  Envelope envelope = Envelope::sin2;
  /// Ramp length in cycles for the trapezoid envelope.
  double ramp_cycles = 2.0;

  double omega() const { return units::hartree_nm / wavelength_nm; }
  double peak_field() const { return std::sqrt(intensity_wcm2 / units::intensity_au_wcm2); }
  double period() const { return 2.0 * units::pi / omega(); }
  double duration() const { return n_cycles * period(); }
  double duration_fs() const { return duration() * units::au_time_fs; }

  void validate() const {
    if (!(wavelength_nm > 0.0)) throw std::invalid_argument("pulse: wavelength must be positive");
    if (intensity_wcm2 < 0.0) throw std::invalid_argument("pulse: intensity must be >= 0");
    if (!(n_cycles > 0.0)) throw std::invalid_argument("pulse: cycle count must be positive");
    if (envelope == Envelope::trapezoid && !(2.0 * ramp_cycles <= n_cycles))
      throw std::invalid_argument("pulse: ramps longer than the pulse");
  }

  bool operator==(const LaserPulse&) const = default;
};

inline double pulse_envelope(const LaserPulse& pulse, double t) {
  const double tau = pulse.duration();
  if (t < 0.0 || t > tau) return 0.0;
  if (pulse.envelope == Envelope::sin2) {
    const double s = std::sin(units::pi * t / tau);
    return s * s;
  }
  const double ramp = pulse.ramp_cycles * pulse.period();
  if (t < ramp) return t / ramp;
  if (t > tau - ramp) return (tau - t) / ramp;
  return 1.0;
}

/// Electric field E(t); the interaction energy added to V_eff is E(t) * z.
inline double laser_amplitude(const LaserPulse& pulse, double t) {
  return pulse.peak_field() * pulse_envelope(pulse, t) * std::cos(pulse.omega() * t);
}

/// Components of the effective potential at one instant.
struct PotentialStack {
  RealField ionic;
  RealField hartree;
  RealField xc_up;
  RealField xc_down;
  double laser_coefficient = 0.0;

  /// Total potential seen by spin s, including E(t) * z.
  RealField effective(Spin s, const Grid& grid) const {
    grid.check_shape(ionic);
    grid.check_shape(hartree);
    const RealField& xc = s == Spin::up ? xc_up : xc_down;
    grid.check_shape(xc);
    RealField v = ionic + hartree + xc;
    if (laser_coefficient != 0.0) v.colwise() += laser_coefficient * grid.z_points();
    return v;
  }
};

inline PotentialStack assemble_effective(RealField ionic, RealField hartree,
                                         std::pair<RealField, RealField> xc,
                                         const LaserPulse& pulse, double t) {
  PotentialStack stack{std::move(ionic), std::move(hartree), std::move(xc.first),
                       std::move(xc.second), laser_amplitude(pulse, t)};
  if (stack.ionic.rows() != stack.hartree.rows() || stack.ionic.cols() != stack.hartree.cols() ||
      stack.ionic.rows() != stack.xc_up.rows() || stack.ionic.cols() != stack.xc_up.cols() ||
      stack.ionic.rows() != stack.xc_down.rows() || stack.ionic.cols() != stack.xc_down.cols())
    throw ShapeError("assemble_effective: potential components have different shapes");
  return stack;
}

}  // namespace tddft
