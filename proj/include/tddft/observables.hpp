#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"
#include "grid.hpp"
#include "potentials.hpp"

namespace tddft {

/// Cylinder |z| <= z_half_extent, rho <= rho_extent whose interior norm counts
/// as bound.
struct AnalysisBox {
  double z_half_extent = 20.0;
  double rho_extent = 12.0;

  void validate() const {
    if (!(z_half_extent > 0.0) || !(rho_extent > 0.0))
      throw std::invalid_argument("analysis box: extents must be positive");
  }

  /// The box must lie strictly inside the grid.
  void validate(const Grid& grid) const {
    validate();
    if (z_half_extent >= grid.z_half_extent())
      throw std::invalid_argument("analysis box: z_half_extent " + std::to_string(z_half_extent) +
                                  " reaches the grid edge " + std::to_string(grid.z_half_extent()));
    const double rho_max = grid.rho_points()(grid.n_rho() - 1);
    if (rho_extent >= rho_max)
      throw std::invalid_argument("analysis box: rho_extent " + std::to_string(rho_extent) +
                                  " reaches the outermost radial node " + std::to_string(rho_max));
  }

  AnalysisBox scaled(double factor) const { return {z_half_extent * factor, rho_extent * factor}; }

  bool operator==(const AnalysisBox&) const = default;
};

/// Cell weights restricted to the box (zero outside).
inline RealField box_weights(const AnalysisBox& box, const Grid& grid) {
  box.validate(grid);
  RealField w = grid.cell_weights();
  const double eps = 1e-12;
  for (int k = 0; k < grid.n_rho(); ++k)
    for (int a = 0; a < grid.n_z(); ++a)
      if (std::abs(grid.z_points()(a)) > box.z_half_extent + eps ||
          grid.rho_points()(k) > box.rho_extent + eps)
        w(a, k) = 0.0;
  return w;
}

/// N_j: norm of the orbital inside the box.
template <typename Derived>
double bound_population(const Eigen::MatrixBase<Derived>& values, const RealField& weights) {
  return values.cwiseAbs2().cwiseProduct(weights).sum();
}

template <typename Derived>
double bound_population(const Eigen::MatrixBase<Derived>& values, const AnalysisBox& box,
                        const Grid& grid) {
  grid.check_shape(values);
  return bound_population(values, box_weights(box, grid));
}

inline double bound_population(const Orbital& orbital, const AnalysisBox& box, const Grid& grid) {
  return bound_population(orbital.values, box, grid);
}

/// Per-spin-orbital box populations sampled during a run.
struct PopulationTrace {
  std::vector<std::string> labels;
  std::vector<double> times;
  std::vector<double> field;
  /// bound[s][j]: N_j at sample s.
  std::vector<std::vector<double>> bound;
  /// absorbed[s][j]: norm removed by the absorber up to sample s.
  std::vector<std::vector<double>> absorbed;

  std::size_t samples() const { return times.size(); }
  std::size_t orbitals() const { return labels.size(); }

  /// Escaped fraction 1 - N_j; includes the absorbed norm.
  double escaped(std::size_t sample, std::size_t j) const { return 1.0 - bound[sample][j]; }

  void append(double t, double e, std::vector<double> n, std::vector<double> a) {
    if (n.size() != labels.size() || a.size() != labels.size())
      throw std::invalid_argument("population trace: sample width does not match labels");
    times.push_back(t);
    field.push_back(e);
    bound.push_back(std::move(n));
    absorbed.push_back(std::move(a));
  }

  bool operator==(const PopulationTrace&) const = default;
};

struct IonProbabilities {
  double p0 = 1.0;
  double p1 = 0.0;
  /// Everything beyond single ionisation, 1 - P0 - P1.
  double p2plus = 0.0;
};

/// P0 = prod N_j and P1 = sum_n (prod_{j != n} N_j)(1 - N_n), with products
/// over spin-orbitals. The expansion of prod (N_j + (1 - N_j)) is accumulated
/// term by term, so all three parts are non-negative and close to one.
inline IonProbabilities ion_probabilities(std::span<const double> populations) {
  IonProbabilities p;
  double higher = 0.0;
  for (const double n : populations) {
    if (!(n >= 0.0 && n <= 1.0))
      throw std::invalid_argument("ion probabilities: population " + std::to_string(n) +
                                  " outside [0, 1]");
    const double out = 1.0 - n;
    higher += p.p1 * out;
    p.p1 = p.p1 * n + p.p0 * out;
    p.p0 *= n;
  }
  p.p2plus = higher;
  return p;
}

/// Populations can leave [0, 1] by rounding; clamp before forming products.
inline std::vector<double> clamp_populations(std::span<const double> populations) {
  std::vector<double> out(populations.begin(), populations.end());
  for (double& n : out) n = std::clamp(n, 0.0, 1.0);
  return out;
}

struct IonYieldRecord {
  double intensity_wcm2 = 0.0;
  double wavelength_nm = 0.0;
  std::string molecule;
  std::string occupation;
  double p0 = 1.0;
  double p1 = 0.0;
  double p2plus = 0.0;
  /// Largest P1 seen at any sample.
  double p1_max = 0.0;
};

inline IonYieldRecord ion_yield(const PopulationTrace& trace, const LaserPulse& pulse,
                                const std::string& molecule, const std::string& occupation) {
  if (trace.samples() == 0) throw std::invalid_argument("ion yield: empty trace");
  IonYieldRecord r;
  r.intensity_wcm2 = pulse.intensity_wcm2;
  r.wavelength_nm = pulse.wavelength_nm;
  r.molecule = molecule;
  r.occupation = occupation;
  for (std::size_t s = 0; s < trace.samples(); ++s)
    r.p1_max = std::max(r.p1_max, ion_probabilities(clamp_populations(trace.bound[s])).p1);
  const IonProbabilities end = ion_probabilities(clamp_populations(trace.bound.back()));
  r.p0 = end.p0;
  r.p1 = end.p1;
  r.p2plus = end.p2plus;
  return r;
}

/// U_p = E0^2 / (4 omega^2), atomic units.
inline double ponderomotive_energy(const LaserPulse& pulse) {
  const double e0 = pulse.peak_field();
  const double w = pulse.omega();
  return e0 * e0 / (4.0 * w * w);
}

/// gamma = sqrt(I_p / (2 U_p)) with I_p in hartree.
inline double keldysh(double ip, const LaserPulse& pulse) {
  if (!(ip > 0.0)) throw std::invalid_argument("keldysh: I_p must be positive");
  if (!(pulse.intensity_wcm2 > 0.0)) throw std::invalid_argument("keldysh: intensity must be positive");
  return std::sqrt(ip / (2.0 * ponderomotive_energy(pulse)));
}

struct DiagnosticParams {
  double ip = 0.0;
  double up = 0.0;
  double omega = 0.0;
  double gamma = 0.0;
  int photons = 0;
  double k_n = 0.0;
  double bond_length = 0.0;
  /// k_N * R; absent when the N-photon channel is closed.
  std::optional<double> k_n_r;
};

/// k_N R with k_N^2 / 2 = N omega - U_p - I_p. A closed channel
/// (N omega < U_p + I_p) gives an empty result rather than a number.
inline std::optional<double> interference_parameter(int photons, const LaserPulse& pulse, double ip,
                                                    double bond_length) {
  const double excess = photons * pulse.omega() - ponderomotive_energy(pulse) - ip;
  if (excess < 0.0) return std::nullopt;
  return std::sqrt(2.0 * excess) * bond_length;
}

/// Smallest photon number whose channel is open.
inline int lowest_open_channel(const LaserPulse& pulse, double ip) {
  return static_cast<int>(std::ceil((ponderomotive_energy(pulse) + ip) / pulse.omega()));
}

inline DiagnosticParams diagnostics(double ip, const LaserPulse& pulse, double bond_length) {
  DiagnosticParams d;
  d.ip = ip;
  d.up = ponderomotive_energy(pulse);
  d.omega = pulse.omega();
  d.gamma = keldysh(ip, pulse);
  d.photons = lowest_open_channel(pulse, ip);
  d.bond_length = bond_length;
  d.k_n_r = interference_parameter(d.photons, pulse, ip, bond_length);
  d.k_n = d.k_n_r ? *d.k_n_r / bond_length : 0.0;
  return d;
}

}  // namespace tddft
