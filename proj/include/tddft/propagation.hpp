#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "field.hpp"
#include "grid.hpp"
#include "groundstate.hpp"
#include "hamiltonian.hpp"
#include "krylov.hpp"
#include "observables.hpp"
#include "occupation.hpp"
#include "parallel.hpp"
#include "potentials.hpp"

namespace tddft {

enum class UpdateScheme {
  /// Half step with the current potential, rebuild V at the midpoint, full step.
  predictor_corrector,
  /// Ground-state Hartree and exchange held fixed; only the laser term varies.
  frozen_potential,
};

inline const char* to_string(UpdateScheme s) {
  return s == UpdateScheme::predictor_corrector ? "predictor_corrector" : "frozen_potential";
}

inline UpdateScheme parse_update_scheme(const std::string& s) {
  if (s == "predictor_corrector") return UpdateScheme::predictor_corrector;
  if (s == "frozen_potential") return UpdateScheme::frozen_potential;
  throw std::invalid_argument("unknown potential update scheme '" + s + "'");
}

/// cos^exponent mask beyond z_onset in |z| and beyond rho_onset in rho.
struct AbsorberSpec {
  bool enabled = true;
  /// Onset in |z|, bohr; 0 places it at 90% of the z half-extent.
  double z_onset = 0.0;
  /// Onset in rho, bohr; 0 places it at the analysis box radius.
  double rho_onset = 0.0;
  double exponent = 0.125;

  bool operator==(const AbsorberSpec&) const = default;
};

struct PropagatorSpec {
  double dt = 0.02;
  int krylov_order = 18;
  UpdateScheme scheme = UpdateScheme::predictor_corrector;
  /// Bound on the estimated local error of each Krylov substep.
  double krylov_tolerance = 1e-9;
  AbsorberSpec absorber;

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("propagator: dt must be positive");
    if (krylov_order < 2) throw std::invalid_argument("propagator: krylov_order must be >= 2");
    if (!(krylov_tolerance > 0.0)) throw std::invalid_argument("propagator: krylov_tolerance must be positive");
    if (absorber.enabled && !(absorber.exponent > 0.0))
      throw std::invalid_argument("propagator: absorber exponent must be positive");
  }

  bool operator==(const PropagatorSpec&) const = default;
};

/// Which spin-orbitals respond to the field; frozen ones keep their
/// ground-state form for the whole run.
struct FreezeMask {
  std::vector<bool> active;

  static FreezeMask all_active(std::size_t n) { return {std::vector<bool>(n, true)}; }

  /// Active exactly for the entries whose symmetry label is listed.
  static FreezeMask only(const OccupationSpec& occ, const std::vector<std::string>& labels) {
    FreezeMask mask;
    for (const auto& e : occ.entries)
      mask.active.push_back(std::find(labels.begin(), labels.end(), e.label) != labels.end());
    return mask;
  }

  void validate(std::size_t n) const {
    if (active.size() != n)
      throw std::invalid_argument("freeze mask: " + std::to_string(active.size()) +
                                  " flags for " + std::to_string(n) + " spin-orbitals");
    if (std::find(active.begin(), active.end(), true) == active.end())
      throw std::invalid_argument("freeze mask: at least one orbital must be active");
  }

  bool operator==(const FreezeMask&) const = default;
};

/// The mask field of an absorber on a grid; 1 inside both onsets.
class Absorber {
 public:
  Absorber() = default;

  Absorber(const AbsorberSpec& spec, const Grid& grid, const AnalysisBox& box) : spec_(spec) {
    if (!spec.enabled) return;
    const double z_edge = grid.z_half_extent();
    const double rho_edge = grid.rho_points()(grid.n_rho() - 1);
    z_onset_ = spec.z_onset > 0.0 ? spec.z_onset : 0.9 * z_edge;
    rho_onset_ = spec.rho_onset > 0.0 ? spec.rho_onset : box.rho_extent;
    if (!(z_onset_ < z_edge))
      throw std::invalid_argument("absorber: z onset " + std::to_string(z_onset_) +
                                  " beyond the grid edge");
    if (!(box.z_half_extent < z_onset_) || box.rho_extent > rho_onset_)
      throw std::invalid_argument("absorber overlaps the analysis box");
    auto profile = [&](double x, double onset, double edge) {
      if (x <= onset) return 1.0;
      if (x >= edge) return 0.0;
      return std::pow(std::cos(0.5 * units::pi * (x - onset) / (edge - onset)), spec.exponent);
    };
    mask_.resize(grid.n_z(), grid.n_rho());
    for (int k = 0; k < grid.n_rho(); ++k)
      for (int a = 0; a < grid.n_z(); ++a)
        mask_(a, k) = profile(std::abs(grid.z_points()(a)), z_onset_, z_edge) *
                      (rho_onset_ < rho_edge ? profile(grid.rho_points()(k), rho_onset_, rho_edge) : 1.0);
  }

  bool enabled() const { return spec_.enabled; }
  const RealField& mask() const { return mask_; }
  double z_onset() const { return z_onset_; }
  double rho_onset() const { return rho_onset_; }

  /// Multiplies by the mask; returns the norm removed.
  double apply(ComplexField& psi, const Grid& grid) const {
    if (!spec_.enabled) return 0.0;
    const double before = norm_squared(psi, grid);
    psi.array() *= mask_.array().cast<complex>();
    return before - norm_squared(psi, grid);
  }

 private:
  AbsorberSpec spec_{false};
  RealField mask_;
  double z_onset_ = 0.0;
  double rho_onset_ = 0.0;
};

inline double apply_absorber(ComplexField& psi, const Absorber& absorber, const Grid& grid) {
  return absorber.apply(psi, grid);
}

/// One Krylov step of exp(-i H dt) for a single orbital in a fixed potential.
/// Removes the components of f along orthonormal states.
inline void project_out(ComplexField& f, const std::vector<ComplexField>& states, const Grid& grid) {
  for (const ComplexField& p : states) f -= inner_product(p, f, grid) * p;
}

inline ComplexField krylov_step(const ComplexField& psi, int m, const RealField& potential,
                                const Grid& grid, const PropagatorSpec& spec, double dt,
                                KrylovStats* stats = nullptr, const std::vector<ComplexField>& excluded = {}) {
  const int am = std::abs(m);
  if (excluded.empty())
    return krylov_exponential(
        psi, dt, [&](const ComplexField& f) { return apply_hamiltonian(f, am, potential, grid); }, grid,
        spec.krylov_order, spec.krylov_tolerance, stats);
  // Q H Q with Q = 1 - sum |p><p| keeps psi orthogonal to the excluded states.
  return krylov_exponential(
      psi, dt,
      [&](const ComplexField& f) {
        ComplexField g = f;
        project_out(g, excluded, grid);
        ComplexField h = apply_hamiltonian(g, am, potential, grid);
        project_out(h, excluded, grid);
        return h;
      },
      grid, spec.krylov_order, spec.krylov_tolerance, stats);
}

/// Everything that changes during a run; enough to continue it exactly.
struct PropagationState {
  long step = 0;
  /// One field per propagated group of identical spin-orbitals.
  std::vector<ComplexField> fields;
  /// Norm removed by the absorber, per group.
  std::vector<double> absorbed;
  PopulationTrace trace;
  KrylovStats krylov;

  bool operator==(const PropagationState& o) const {
    if (step != o.step || fields.size() != o.fields.size() || absorbed != o.absorbed || !(trace == o.trace))
      return false;
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (fields[i] != o.fields[i]) return false;
    return true;
  }
};

/// Time-dependent Kohn-Sham propagation of a ground state through a pulse.
///
/// Spin-orbitals that provably share one evolution (the two signs of m, and
/// both spins when the occupation and the freeze mask are spin symmetric)
/// are propagated once. Populations are sampled every `observe_every` steps
/// and at the final step.
class Propagator {
 public:
  Propagator(const KohnShamModel& model, const GroundState& ground, LaserPulse pulse,
             PropagatorSpec spec, FreezeMask mask, AnalysisBox box, int observe_every = 1,
             int threads = 1)
      : model_(&model),
        ground_(&ground),
        pulse_(pulse),
        spec_(spec),
        mask_(std::move(mask)),
        box_(box),
        observe_every_(observe_every),
        threads_(threads) {
    const Grid& grid = model.grid();
    spec_.validate();
    pulse_.validate();
    if (!(ground.grid == grid.spec())) throw std::invalid_argument("propagate: ground state is on another grid");
    if (ground.orbitals.size() != ground.occupation.entries.size())
      throw std::invalid_argument("propagate: ground state orbitals do not match its occupation");
    mask_.validate(ground.orbitals.size());
    box_.validate(grid);
    if (observe_every_ < 1) throw std::invalid_argument("propagate: observe_every must be >= 1");
    absorber_ = Absorber(spec_.absorber, grid, box_);
    box_weights_ = box_weights(box_, grid);
    build_groups();

    frozen_ = {RealField::Zero(grid.n_z(), grid.n_rho()), RealField::Zero(grid.n_z(), grid.n_rho())};
    for (std::size_t i = 0; i < ground.orbitals.size(); ++i)
      if (!mask_.active[i]) frozen_[ground.orbitals[i].spin] += ground.orbitals[i].values.cwiseAbs2();
    if (spec_.scheme == UpdateScheme::frozen_potential) ground_potentials_ = model.potentials(ground.density);
  }

  const Grid& grid() const { return model_->grid(); }
  const LaserPulse& pulse() const { return pulse_; }
  const PropagatorSpec& spec() const { return spec_; }
  const AnalysisBox& box() const { return box_; }
  const Absorber& absorber() const { return absorber_; }
  std::size_t group_count() const { return groups_.size(); }

  long total_steps() const { return static_cast<long>(std::ceil(pulse_.duration() / spec_.dt - 1e-9)); }
  /// Steps per optical cycle, the checkpoint cadence.
  long steps_per_cycle() const { return std::max(1L, std::lround(pulse_.period() / spec_.dt)); }
  double time_of(long step) const { return static_cast<double>(step) * spec_.dt; }

  PropagationState initial_state() const {
    PropagationState s;
    for (const Group& g : groups_) s.fields.push_back(ground_->orbitals[g.members.front()].values);
    s.absorbed.assign(groups_.size(), 0.0);
    for (const auto& e : ground_->occupation.entries) s.trace.labels.push_back(spin_orbital_name(e));
    record(s);
    return s;
  }

  /// Current spin-orbitals: propagated ones from their group, frozen ones unchanged.
  std::vector<Orbital> orbitals(const PropagationState& s) const {
    std::vector<Orbital> out = ground_->orbitals;
    for (std::size_t g = 0; g < groups_.size(); ++g)
      for (std::size_t i : groups_[g].members) out[i].values = s.fields[g];
    return out;
  }

  SpinDensity density(const std::vector<ComplexField>& fields) const {
    SpinDensity d = frozen_;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const RealField a = fields[g].cwiseAbs2();
      if (groups_[g].count_up > 0) d.up += groups_[g].count_up * a;
      if (groups_[g].count_down > 0) d.down += groups_[g].count_down * a;
    }
    return d;
  }

  void step(PropagationState& s) const {
    if (s.fields.size() != groups_.size()) throw std::invalid_argument("propagate: state does not match");
    const double t0 = time_of(s.step);
    const double dt = spec_.dt;
    PotentialStack mid;
    if (spec_.scheme == UpdateScheme::predictor_corrector) {
      PotentialStack now = model_->potentials(density(s.fields));
      now.laser_coefficient = laser_amplitude(pulse_, t0 + 0.25 * dt);
      std::vector<ComplexField> predicted(groups_.size());
      advance(s.fields, predicted, now, 0.5 * dt, s.krylov);
      mid = model_->potentials(density(predicted));
    } else {
      mid = ground_potentials_;
    }
    mid.laser_coefficient = laser_amplitude(pulse_, t0 + 0.5 * dt);
    std::vector<ComplexField> next(groups_.size());
    advance(s.fields, next, mid, dt, s.krylov);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      s.absorbed[g] += absorber_.apply(next[g], grid());
      project_out(next[g], groups_[g].excluded, grid());
    }
    s.fields = std::move(next);
    ++s.step;
    if (s.step % observe_every_ == 0 || s.step == total_steps()) record(s);
  }

  /// Steps until `until` (or the end of the pulse); `checkpoint` is called
  /// after every completed optical cycle.
  void run(PropagationState& s, long until = -1,
           const std::function<void(const PropagationState&)>& checkpoint = {}) const {
    const long end = until < 0 ? total_steps() : std::min(until, total_steps());
    while (s.step < end) {
      step(s);
      if (checkpoint && s.step % steps_per_cycle() == 0) checkpoint(s);
    }
  }

  PopulationTrace propagate() const {
    PropagationState s = initial_state();
    run(s);
    return s.trace;
  }

 private:
  struct Group {
    int abs_m;
    Spin potential_spin;
    std::vector<std::size_t> members;
    double count_up = 0;
    double count_down = 0;
    /// Frozen orbitals of the same channel; active ones stay orthogonal to them.
    std::vector<ComplexField> excluded;
  };

  void build_groups() {
    const OccupationSpec& occ = ground_->occupation;
    // Both spins evolve alike when the occupation and the mask are spin symmetric.
    bool merge_spins = occ.spin_symmetric();
    if (merge_spins) {
      std::map<std::tuple<std::string, int>, std::pair<int, int>> active_by_spin;
      for (std::size_t i = 0; i < occ.entries.size(); ++i) {
        const auto& e = occ.entries[i];
        auto& c = active_by_spin[{e.label, e.m}];
        if (mask_.active[i]) (e.spin == Spin::up ? c.first : c.second) += 1;
      }
      for (const auto& [key, c] : active_by_spin) merge_spins = merge_spins && c.first == c.second;
    }
    std::map<std::tuple<int, int, int>, std::size_t> index;
    for (std::size_t i = 0; i < occ.entries.size(); ++i) {
      if (!mask_.active[i]) continue;
      const auto& e = occ.entries[i];
      const Spin ps = merge_spins ? Spin::up : e.spin;
      const auto key = std::make_tuple(std::abs(e.m), spin_index(ps), ground_->state_index[i]);
      auto it = index.find(key);
      if (it == index.end()) {
        it = index.emplace(key, groups_.size()).first;
        groups_.push_back({std::abs(e.m), ps, {}, 0, 0});
      }
      Group& g = groups_[it->second];
      if (!g.members.empty() && ground_->orbitals[g.members.front()].values != ground_->orbitals[i].values)
        throw std::logic_error("propagate: orbitals sharing a channel state differ");
      g.members.push_back(i);
      (e.spin == Spin::up ? g.count_up : g.count_down) += 1;
    }
    for (Group& g : groups_) {
      std::vector<int> seen;
      for (std::size_t i = 0; i < occ.entries.size(); ++i) {
        const auto& e = occ.entries[i];
        if (mask_.active[i] || std::abs(e.m) != g.abs_m || e.spin != g.potential_spin) continue;
        if (std::find(seen.begin(), seen.end(), ground_->state_index[i]) != seen.end()) continue;
        seen.push_back(ground_->state_index[i]);
        g.excluded.push_back(ground_->orbitals[i].values);
      }
    }
  }

  void advance(const std::vector<ComplexField>& in, std::vector<ComplexField>& out,
               const PotentialStack& pot, double dt, KrylovStats& stats) const {
    const RealField v_up = pot.effective(Spin::up, grid());
    const RealField v_down = pot.effective(Spin::down, grid());
    std::vector<KrylovStats> local(groups_.size());
    parallel_for(static_cast<int>(groups_.size()), threads_, [&](int g) {
      const RealField& v = groups_[g].potential_spin == Spin::up ? v_up : v_down;
      out[g] = krylov_step(in[g], groups_[g].abs_m, v, grid(), spec_, dt, &local[g], groups_[g].excluded);
    });
    for (const KrylovStats& k : local) {
      stats.substeps += k.substeps;
      stats.matvecs += k.matvecs;
      stats.error = std::max(stats.error, k.error);
    }
  }

  void record(PropagationState& s) const {
    const std::size_t n = ground_->orbitals.size();
    std::vector<double> bound(n), absorbed(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (!mask_.active[i]) bound[i] = bound_population(ground_->orbitals[i].values, box_weights_);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const double nb = bound_population(s.fields[g], box_weights_);
      for (std::size_t i : groups_[g].members) {
        bound[i] = nb;
        absorbed[i] = s.absorbed[g];
      }
    }
    const double t = time_of(s.step);
    s.trace.append(t, laser_amplitude(pulse_, t), std::move(bound), std::move(absorbed));
  }

  const KohnShamModel* model_;
  const GroundState* ground_;
  LaserPulse pulse_;
  PropagatorSpec spec_;
  FreezeMask mask_;
  AnalysisBox box_;
  int observe_every_;
  int threads_;
  Absorber absorber_;
  RealField box_weights_;
  std::vector<Group> groups_;
  SpinDensity frozen_;
  PotentialStack ground_potentials_;
};

}  // namespace tddft
