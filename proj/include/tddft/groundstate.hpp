#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "field.hpp"
#include "grid.hpp"
#include "hamiltonian.hpp"
#include "hartree.hpp"
#include "lanczos.hpp"
#include "occupation.hpp"
#include "parallel.hpp"
#include "potentials.hpp"
#include "units.hpp"

namespace tddft {

struct ScfParams {
  double mixing = 0.3;
  int max_iterations = 300;
  /// Change of total energy between iterations, hartree.
  double energy_tolerance = 1e-7;
  /// Integrated absolute change of the total density, electrons.
  double density_tolerance = 1e-5;
  /// Residual bound on channel eigenvectors.
  double eigen_tolerance = 1e-10;
  /// When false the Hartree and exchange terms are dropped (one-electron mode).
  bool interacting = true;
  HartreeOptions hartree;
  /// Seed of the noise added to eigensolver start vectors.
  unsigned seed = 12345;
  /// Channels diagonalised concurrently.
  int threads = 1;

  void validate() const {
    if (!(mixing > 0.0 && mixing <= 1.0)) throw std::invalid_argument("scf: mixing must be in (0, 1]");
    if (!(energy_tolerance > 0.0) || !(density_tolerance > 0.0) || !(eigen_tolerance > 0.0))
      throw std::invalid_argument("scf: tolerances must be positive");
    if (max_iterations < 1) throw std::invalid_argument("scf: max_iterations must be >= 1");
  }
};

struct GroundState {
  GridSpec grid;
  std::vector<Nucleus> nuclei;
  OccupationSpec occupation;
  /// One orbital per occupation entry, in entry order, normalised on the grid.
  std::vector<Orbital> orbitals;
  std::vector<double> energies;
  /// Eigenstate index of each orbital within its (|m|, spin) channel.
  std::vector<int> state_index;
  SpinDensity density;
  double total_energy = 0.0;
  int iterations = 0;
  bool interacting = true;

  /// Occupied spin-orbital with the highest energy; later entries win ties.
  std::size_t homo() const {
    std::size_t best = 0;
    for (std::size_t i = 0; i < energies.size(); ++i)
      if (energies[i] >= energies[best]) best = i;
    return best;
  }
};

inline SpinDensity build_density(std::span<const Orbital> orbitals, const Grid& grid) {
  SpinDensity d{RealField::Zero(grid.n_z(), grid.n_rho()), RealField::Zero(grid.n_z(), grid.n_rho())};
  for (const Orbital& o : orbitals) d[o.spin] += o.values.cwiseAbs2();
  return d;
}

/// Effective-potential builder shared by the SCF and the propagator.
class KohnShamModel {
 public:
  KohnShamModel(const Grid& grid, std::vector<Nucleus> nuclei, bool interacting,
                HartreeOptions hartree = {})
      : grid_(&grid),
        nuclei_(std::move(nuclei)),
        interacting_(interacting),
        ionic_(eval_ionic(std::span<const Nucleus>(nuclei_), grid)),
        hartree_(grid, hartree) {}

  const Grid& grid() const { return *grid_; }
  const std::vector<Nucleus>& nuclei() const { return nuclei_; }
  bool interacting() const { return interacting_; }
  const RealField& ionic() const { return ionic_; }
  const HartreeSolver& hartree_solver() const { return hartree_; }

  /// Field-free potential components for a density.
  PotentialStack potentials(const SpinDensity& density) const {
    PotentialStack s;
    s.ionic = ionic_;
    if (interacting_) {
      s.hartree = hartree_.solve(density.total());
      auto [up, dn] = eval_xlda(density);
      s.xc_up = std::move(up);
      s.xc_down = std::move(dn);
    } else {
      s.hartree = RealField::Zero(grid_->n_z(), grid_->n_rho());
      s.xc_up = s.hartree;
      s.xc_down = s.hartree;
    }
    return s;
  }

  /// True when the nuclei are placed symmetrically about z = 0.
  bool mirror_symmetric() const {
    for (const Nucleus& n : nuclei_) {
      const bool partner = std::any_of(nuclei_.begin(), nuclei_.end(), [&](const Nucleus& o) {
        return o.charge == n.charge && o.z == -n.z;
      });
      if (!partner) return false;
    }
    return true;
  }

 private:
  const Grid* grid_;
  std::vector<Nucleus> nuclei_;
  bool interacting_;
  RealField ionic_;
  HartreeSolver hartree_;
};

/// Kohn-Sham total energy from orbital eigenvalues with the double counting
/// removed: sum eps - 1/2 int n V_H - sum_s int n_s V_xc,s + E_x + E_nn.
/// Eigenvalues are taken as expectation values of the Hamiltonian built from
/// the state's own density.
inline double total_energy(const GroundState& state, const KohnShamModel& model) {
  const Grid& grid = model.grid();
  const PotentialStack pot = model.potentials(state.density);
  double band = 0.0;
  for (std::size_t i = 0; i < state.orbitals.size(); ++i) {
    const Orbital& o = state.orbitals[i];
    if (state.occupation.entries[i].occupation == 0) continue;
    const RealField v = pot.effective(o.spin, grid);
    band += std::real(inner_product(o.values, apply_hamiltonian(o.values, o.m, v, grid), grid));
  }
  double e = band + nuclear_repulsion(std::span<const Nucleus>(model.nuclei()));
  if (model.interacting()) {
    const RealField n = state.density.total();
    e -= hartree_energy(n, pot.hartree, grid);
    e -= integrate(state.density.up.cwiseProduct(pot.xc_up), grid);
    e -= integrate(state.density.down.cwiseProduct(pot.xc_down), grid);
    e += exchange_energy(state.density, grid);
  }
  return e;
}

namespace detail {

/// Eigenstates of one parity sector (0 when parity is not separated).
struct SectorSolution {
  int parity = 0;
  std::vector<double> energies;
  std::vector<RealField> states;
  /// Loosely converged first unoccupied state, for aufbau checks.
  double guard_energy = std::numeric_limits<double>::infinity();
};

struct ChannelSolution {
  std::vector<SectorSolution> sectors;
  int matvecs = 0;

  const SectorSolution& sector(int parity) const {
    for (const auto& s : sectors)
      if (s.parity == parity) return s;
    throw std::logic_error("missing parity sector");
  }
};

inline void fix_sign(RealField& f) {
  Eigen::Index r = 0, c = 0;
  f.cwiseAbs().maxCoeff(&r, &c);
  if (f(r, c) < 0.0) f = -f;
}

/// Lowest states of T_m + V in each requested z-parity sector; `requests`
/// holds (parity, count) pairs, parity 0 meaning no separation. One extra
/// guard state per sector is converged loosely.
inline ChannelSolution solve_channel(const Grid& grid, int m, const RealField& potential,
                                     const std::vector<std::pair<int, int>>& requests,
                                     const std::vector<RealField>& guesses, double tolerance,
                                     unsigned start_seed = 12345) {
  const Eigen::Index n = grid.size();
  const Eigen::VectorXd sw =
      Eigen::Map<const Eigen::VectorXd>(grid.cell_weights().data(), n).cwiseSqrt();
  const Eigen::Map<const RealField> sw_field(sw.data(), grid.n_z(), grid.n_rho());
  ChannelSolution out;

  for (const auto& [sector, count] : requests) {
    if (count < 0) continue;
    auto project = [sector](RealField& f) {
      if (sector != 0) f = project_parity(f, sector);
    };
    auto op = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
      RealField psi = Eigen::Map<const RealField>(x.data(), grid.n_z(), grid.n_rho());
      psi.array() /= sw_field.array();
      RealField hpsi = apply_hamiltonian(psi, m, potential, grid);
      project(hpsi);
      hpsi.array() *= sw_field.array();
      y = Eigen::Map<const Eigen::VectorXd>(hpsi.data(), n);
    };

    std::vector<Eigen::VectorXd> seed;
    for (const RealField& g : guesses) {
      RealField p = g;
      project(p);
      if (norm_squared(p, grid) < 1e-6 * norm_squared(g, grid)) continue;
      seed.push_back(Eigen::Map<const Eigen::VectorXd>(p.data(), n).cwiseProduct(sw));
    }
    Eigen::MatrixXd guess(n, static_cast<Eigen::Index>(seed.size()));
    for (std::size_t i = 0; i < seed.size(); ++i) guess.col(i) = seed[i];
    if (seed.empty()) {
      RealField f(grid.n_z(), grid.n_rho());
      for (int k = 0; k < grid.n_rho(); ++k)
        for (int a = 0; a < grid.n_z(); ++a) {
          const double z = grid.z_points()(a);
          const double r2 = z * z + std::pow(grid.rho_points()(k), 2);
          f(a, k) = (sector >= 0 ? 1.0 + 0.1 * z : z) * std::exp(-0.5 * std::sqrt(1.0 + r2));
        }
      if (m != 0) f.array().rowwise() *= grid.rho_points().transpose().array();
      project(f);
      guess = Eigen::Map<const Eigen::VectorXd>(f.data(), n).cwiseProduct(sw);
    }

    EigenOptions opts;
    opts.n_wanted = count + 1;
    opts.n_strict = count;
    opts.tolerance = count > 0 ? tolerance : opts.loose_tolerance;
    opts.seed = start_seed;
    ThickRestartLanczos lanczos(op, n);
    const EigenResult res = lanczos.solve(opts, guess);
    out.matvecs += res.matvecs;
    if (!res.converged)
      throw NumericalError("channel eigensolver did not converge: residual " +
                           std::to_string(res.residuals.maxCoeff()));
    SectorSolution sol;
    sol.parity = sector;
    for (int i = 0; i < count; ++i) {
      Eigen::VectorXd v = res.vectors.col(i).cwiseQuotient(sw);
      RealField f = Eigen::Map<const RealField>(v.data(), grid.n_z(), grid.n_rho());
      project(f);
      fix_sign(f);
      sol.energies.push_back(res.values(i));
      sol.states.push_back(std::move(f));
    }
    sol.guard_energy = res.values(count);
    out.sectors.push_back(std::move(sol));
  }
  return out;
}

/// Parity sector and level (0-based) of a spin-orbital from its label.
inline std::pair<int, int> sector_and_level(const SpinOrbitalEntry& e) {
  const std::size_t digits = e.label.find_first_not_of("0123456789");
  const int level = std::stoi(e.label.substr(0, digits)) - 1;
  const bool gerade = e.label.back() == 'g';
  const int am = std::abs(e.m);
  const int parity = (am % 2 == 0) == gerade ? 1 : -1;
  return {parity, level};
}

inline SpinDensity initial_density(const KohnShamModel& model, const OccupationSpec& occ) {
  const Grid& grid = model.grid();
  RealField shape = RealField::Zero(grid.n_z(), grid.n_rho());
  for (const Nucleus& nuc : model.nuclei()) {
    const double lambda = 2.0 * std::cbrt(nuc.charge);
    for (int k = 0; k < grid.n_rho(); ++k)
      for (int a = 0; a < grid.n_z(); ++a) {
        const double r = std::hypot(grid.z_points()(a) - nuc.z, grid.rho_points()(k));
        shape(a, k) += nuc.charge * std::exp(-lambda * r);
      }
  }
  shape /= integrate(shape, grid);
  return {shape * occ.spin_count(Spin::up), shape * occ.spin_count(Spin::down)};
}

}  // namespace detail

/// Self-consistent field solution for nuclei on the axis.
///
/// Each (|m|, spin) channel is diagonalised by thick-restart Lanczos. For
/// mirror-symmetric molecules the z-even and z-odd sectors are solved
/// separately and every entry occupies the state its label names (3sg is the
/// third gerade sigma state); the result must obey aufbau within each (m,
/// spin) list. Otherwise the lowest states are filled in entry order.
/// Densities are mixed linearly. `initial` optionally supplies starting
/// orbitals and density.
inline GroundState scf_solve(const KohnShamModel& model, const OccupationSpec& occupation,
                             const ScfParams& params,
                             const GroundState* initial = nullptr) {
  params.validate();
  occupation.validate();
  const Grid& grid = model.grid();
  const bool mirror = model.mirror_symmetric();
  const bool restricted = occupation.spin_symmetric();

  GroundState state;
  state.grid = grid.spec();
  state.nuclei = model.nuclei();
  state.occupation = occupation;
  state.interacting = model.interacting();

  struct Channel {
    int abs_m;
    Spin spin;
    std::vector<std::pair<int, int>> requests;
    std::vector<RealField> guesses;
    detail::ChannelSolution solution;
  };
  auto solved_spin = [&](const SpinOrbitalEntry& e) { return restricted ? Spin::up : e.spin; };
  std::vector<Channel> channels;
  for (Spin s : {Spin::up, Spin::down}) {
    if (restricted && s == Spin::down) continue;
    for (int am = 0; am <= 1; ++am) {
      const int count = occupation.channel_count(am, s);
      if (count == 0) continue;
      Channel ch{am, s, {}, {}, {}};
      if (mirror) {
        int even = 0, odd = 0;
        for (const auto& e : occupation.entries) {
          if (e.occupation == 0 || std::abs(e.m) != am || e.spin != s) continue;
          const auto [parity, level] = detail::sector_and_level(e);
          (parity > 0 ? even : odd) = std::max(parity > 0 ? even : odd, level + 1);
        }
        ch.requests = {{1, even}, {-1, odd}};
      } else {
        ch.requests = {{0, count}};
      }
      channels.push_back(std::move(ch));
    }
  }
  auto channel_of = [&](const SpinOrbitalEntry& e) -> Channel& {
    for (Channel& c : channels)
      if (c.abs_m == std::abs(e.m) && c.spin == solved_spin(e)) return c;
    throw std::logic_error("no channel for " + spin_orbital_name(e));
  };
  if (initial != nullptr) {
    for (Channel& ch : channels)
      for (const Orbital& o : initial->orbitals)
        if (std::abs(o.m) == ch.abs_m && o.spin == ch.spin && o.m >= 0)
          ch.guesses.push_back(o.values.real());
  }

  SpinDensity density_in;
  if (!model.interacting()) {
    density_in = {RealField::Zero(grid.n_z(), grid.n_rho()), RealField::Zero(grid.n_z(), grid.n_rho())};
  } else if (initial != nullptr) {
    density_in = initial->density;
    // Rescale each spin to the requested electron count.
    for (Spin s : {Spin::up, Spin::down}) {
      const double have = integrate(density_in[s], grid);
      const int want = occupation.spin_count(s);
      if (have > 0.0) density_in[s] *= want / have;
    }
  } else {
    density_in = detail::initial_density(model, occupation);
  }

  // Which computed state each entry occupies: (sector parity, level).
  std::vector<std::pair<int, int>> slot(occupation.entries.size());
  for (std::size_t i = 0; i < occupation.entries.size(); ++i)
    slot[i] = mirror ? detail::sector_and_level(occupation.entries[i])
                     : std::pair<int, int>{0, occupation.state_index(i)};

  double previous_energy = 0.0;
  double density_change = 0.0;
  for (int it = 1; it <= params.max_iterations; ++it) {
    if (mirror) {
      density_in.up = project_parity(density_in.up, 1);
      density_in.down = project_parity(density_in.down, 1);
    }
    const PotentialStack pot = model.potentials(density_in);
    parallel_for(static_cast<int>(channels.size()), params.threads, [&](int c) {
      Channel& ch = channels[c];
      RealField v = pot.effective(ch.spin, grid);
      if (mirror) v = project_parity(v, 1);
      ch.solution = detail::solve_channel(grid, ch.abs_m, v, ch.requests, ch.guesses,
                                          params.eigen_tolerance, params.seed);
      ch.guesses.clear();
      for (const auto& sec : ch.solution.sectors)
        ch.guesses.insert(ch.guesses.end(), sec.states.begin(), sec.states.end());
    });

    state.orbitals.clear();
    state.energies.clear();
    for (std::size_t i = 0; i < occupation.entries.size(); ++i) {
      const SpinOrbitalEntry& e = occupation.entries[i];
      const auto& sec = channel_of(e).solution.sector(slot[i].first);
      Orbital o;
      o.values = sec.states[slot[i].second].cast<complex>();
      o.spin = e.spin;
      o.m = e.m;
      o.label = e.label;
      state.orbitals.push_back(std::move(o));
      state.energies.push_back(sec.energies[slot[i].second]);
    }
    state.density = build_density(state.orbitals, grid);
    state.iterations = it;
    state.total_energy = total_energy(state, model);

    density_change = integrate((state.density.total() - density_in.total()).cwiseAbs(), grid);
    const double energy_change = std::abs(state.total_energy - previous_energy);
    previous_energy = state.total_energy;
    if (!model.interacting() ||
        (it > 1 && energy_change < params.energy_tolerance &&
         density_change < params.density_tolerance))
      break;
    if (it == params.max_iterations)
      throw NumericalError("SCF did not converge in " + std::to_string(it) +
                           " iterations: density change " + std::to_string(density_change) +
                           ", energy change " + std::to_string(energy_change));
    density_in.up = (1.0 - params.mixing) * density_in.up + params.mixing * state.density.up;
    density_in.down = (1.0 - params.mixing) * density_in.down + params.mixing * state.density.down;
  }

  // Channel-wide energy rank of each orbital, and aufbau within each (m, spin) list.
  state.state_index.assign(occupation.entries.size(), 0);
  for (std::size_t i = 0; i < occupation.entries.size(); ++i) {
    const SpinOrbitalEntry& e = occupation.entries[i];
    const Channel& ch = channel_of(e);
    int rank = 0;
    for (const auto& sec : ch.solution.sectors)
      for (std::size_t k = 0; k < sec.energies.size(); ++k)
        if (sec.energies[k] < state.energies[i] ||
            (sec.energies[k] == state.energies[i] &&
             std::pair<int, int>{-sec.parity, int(k)} < std::pair<int, int>{-slot[i].first, slot[i].second}))
          ++rank;
    state.state_index[i] = rank;

    // Lowest computed state this (m, spin) list leaves empty.
    double lowest_empty = std::numeric_limits<double>::infinity();
    std::string empty_name;
    for (const auto& sec : ch.solution.sectors) {
      for (std::size_t k = 0; k <= sec.energies.size(); ++k) {
        const bool guard = k == sec.energies.size();
        const double en = guard ? sec.guard_energy : sec.energies[k];
        bool taken = false;
        for (std::size_t j = 0; j < occupation.entries.size() && !guard; ++j)
          taken = taken || (occupation.entries[j].m == e.m && occupation.entries[j].spin == e.spin &&
                            occupation.entries[j].occupation > 0 &&
                            slot[j] == std::pair<int, int>{sec.parity, int(k)});
        if (!taken && en < lowest_empty) {
          lowest_empty = en;
          empty_name = sec.parity == 0
                           ? "state " + std::to_string(k + 1)
                           : std::to_string(k + 1) + (ch.abs_m == 0 ? "s" : "p") +
                                 ((sec.parity > 0) == (ch.abs_m % 2 == 0) ? "g" : "u");
        }
      }
    }
    if (e.occupation > 0 && state.energies[i] > lowest_empty + 1e-8)
      throw std::invalid_argument("occupation lists " + spin_orbital_name(e) + " (" +
                               std::to_string(state.energies[i]) + " Eh) above the empty " +
                               empty_name + " state of its channel (" +
                               std::to_string(lowest_empty) + " Eh)");
  }
  return state;
}

inline GroundState scf_solve(const MoleculeSpec& molecule, const OccupationSpec& occupation,
                             const Grid& grid, const ScfParams& params) {
  molecule.validate();
  if (params.interacting && occupation.electron_count() != molecule.electron_count())
    throw std::invalid_argument("occupation holds " + std::to_string(occupation.electron_count()) +
                                " electrons but " + molecule.name + " has " +
                                std::to_string(molecule.electron_count()));
  const auto nuc = molecule.nuclei();
  KohnShamModel model(grid, {nuc.begin(), nuc.end()}, params.interacting, params.hartree);
  return scf_solve(model, occupation, params);
}

/// Neutral occupation with the given spin-orbital removed.
inline OccupationSpec remove_spin_orbital(const OccupationSpec& occ, std::size_t index) {
  OccupationSpec out = occ;
  out.entries.erase(out.entries.begin() + static_cast<std::ptrdiff_t>(index));
  out.multiplicity = occ.multiplicity == Multiplicity::triplet || occ.multiplicity == Multiplicity::singlet
                         ? Multiplicity::doublet
                         : Multiplicity::singlet;
  return out;
}

struct IonizationResult {
  double ionization_potential_ev = 0.0;
  GroundState neutral;
  GroundState cation;
};

/// Delta-SCF ionisation potential E(cation) - E(neutral) in eV. An empty
/// cation occupation removes the neutral's HOMO spin-orbital.
inline IonizationResult ionization_potential(const MoleculeSpec& molecule,
                                             const OccupationSpec& neutral_occ,
                                             std::optional<OccupationSpec> cation_occ,
                                             const Grid& grid, const ScfParams& params) {
  molecule.validate();
  if (neutral_occ.electron_count() != molecule.electron_count())
    throw std::invalid_argument("neutral occupation does not match " + molecule.name);
  const auto nuc = molecule.nuclei();
  KohnShamModel model(grid, {nuc.begin(), nuc.end()}, params.interacting, params.hartree);
  IonizationResult out;
  out.neutral = scf_solve(model, neutral_occ, params);
  const OccupationSpec cation =
      cation_occ ? *cation_occ : remove_spin_orbital(neutral_occ, out.neutral.homo());
  if (cation.electron_count() + 1 != neutral_occ.electron_count())
    throw std::invalid_argument("cation occupation must hold one electron fewer");
  out.cation = scf_solve(model, cation, params, &out.neutral);
  out.ionization_potential_ev =
      units::hartree_to_ev(out.cation.total_energy - out.neutral.total_energy);
  return out;
}

}  // namespace tddft
