#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"
#include "groundstate.hpp"
#include "propagation.hpp"

namespace tddft {

/// Raised for unreadable, unwritable or malformed files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace checkpoint {

inline constexpr char magic[8] = {'T', 'D', 'K', 'S', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t version = 1;

enum class Kind : std::uint32_t { ground_state = 1, propagation = 2 };

/// Little helper for the flat binary layout: fixed-width scalars, then
/// length-prefixed strings and arrays. Doubles are stored bit for bit, so a
/// restored state continues exactly.
class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    i64(static_cast<std::int64_t>(s.size()));
    raw(s.data(), s.size());
  }
  void doubles(const std::vector<double>& v) {
    i64(static_cast<std::int64_t>(v.size()));
    raw(v.data(), v.size() * sizeof(double));
  }
  void real_field(const RealField& f) {
    i64(f.rows());
    i64(f.cols());
    raw(f.data(), static_cast<std::size_t>(f.size()) * sizeof(double));
  }
  void complex_field(const ComplexField& f) {
    i64(f.rows());
    i64(f.cols());
    raw(f.data(), static_cast<std::size_t>(f.size()) * sizeof(complex));
  }
  const std::string& bytes() const { return buffer_; }

 private:
  void raw(const void* p, std::size_t n) { buffer_.append(static_cast<const char*>(p), n); }
  std::string buffer_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : buffer_(std::move(bytes)) {}

  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  std::int64_t i64() { return scalar<std::int64_t>(); }
  double f64() { return scalar<double>(); }
  std::string str() {
    const std::size_t n = length(1);
    std::string s = buffer_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles() {
    const std::size_t n = length(sizeof(double));
    std::vector<double> v(n);
    copy(v.data(), n * sizeof(double));
    return v;
  }
  RealField real_field() {
    const auto [r, c] = shape(sizeof(double));
    RealField f(r, c);
    copy(f.data(), static_cast<std::size_t>(f.size()) * sizeof(double));
    return f;
  }
  ComplexField complex_field() {
    const auto [r, c] = shape(sizeof(complex));
    ComplexField f(r, c);
    copy(f.data(), static_cast<std::size_t>(f.size()) * sizeof(complex));
    return f;
  }
  bool at_end() const { return pos_ == buffer_.size(); }

 private:
  template <typename T>
  T scalar() {
    T v;
    copy(&v, sizeof v);
    return v;
  }
  std::size_t length(std::size_t unit) {
    const std::int64_t n = i64();
    if (n < 0 || static_cast<std::size_t>(n) > (buffer_.size() - pos_) / unit)
      throw IoError("checkpoint: corrupt length field");
    return static_cast<std::size_t>(n);
  }
  std::pair<Eigen::Index, Eigen::Index> shape(std::size_t unit) {
    const std::int64_t r = i64(), c = i64();
    if (r < 0 || c < 0 || (c > 0 && static_cast<std::size_t>(r) > (buffer_.size() - pos_) / unit / c))
      throw IoError("checkpoint: corrupt array shape");
    return {r, c};
  }
  void copy(void* out, std::size_t n) {
    if (n > buffer_.size() - pos_) throw IoError("checkpoint: unexpected end of file");
    std::memcpy(out, buffer_.data() + pos_, n);
    pos_ += n;
  }
  std::string buffer_;
  std::size_t pos_ = 0;
};

inline void write_header(Writer& w, Kind kind) {
  for (char c : magic) w.u32(static_cast<unsigned char>(c));
  w.u32(version);
  w.u32(static_cast<std::uint32_t>(kind));
}

inline void read_header(Reader& r, Kind kind) {
  for (char c : magic)
    if (r.u32() != static_cast<unsigned char>(c)) throw IoError("checkpoint: not a checkpoint file");
  const std::uint32_t v = r.u32();
  if (v != version)
    throw IoError("checkpoint: format version " + std::to_string(v) + ", expected " +
                  std::to_string(version));
  if (r.u32() != static_cast<std::uint32_t>(kind)) throw IoError("checkpoint: wrong checkpoint kind");
}

inline void write_grid(Writer& w, const GridSpec& g) {
  w.i64(g.n_z);
  w.f64(g.dz);
  w.i64(g.n_rho);
  w.f64(g.h_rho);
  w.i64(g.fd_order);
  w.f64(g.rho_kinetic_cap);
}

inline GridSpec read_grid(Reader& r) {
  GridSpec g;
  g.n_z = static_cast<int>(r.i64());
  g.dz = r.f64();
  g.n_rho = static_cast<int>(r.i64());
  g.h_rho = r.f64();
  g.fd_order = static_cast<int>(r.i64());
  g.rho_kinetic_cap = r.f64();
  return g;
}

/// Writes atomically: a temporary file is renamed over the target.
inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace checkpoint

inline std::string serialize_ground_state(const GroundState& g) {
  checkpoint::Writer w;
  checkpoint::write_header(w, checkpoint::Kind::ground_state);
  checkpoint::write_grid(w, g.grid);
  w.i64(static_cast<std::int64_t>(g.nuclei.size()));
  for (const Nucleus& n : g.nuclei) {
    w.f64(n.charge);
    w.f64(n.z);
  }
  w.str(to_string(g.occupation.multiplicity));
  w.i64(static_cast<std::int64_t>(g.occupation.entries.size()));
  for (const auto& e : g.occupation.entries) {
    w.str(e.label);
    w.i64(e.m);
    w.i64(spin_index(e.spin));
    w.i64(e.occupation);
  }
  w.doubles(g.energies);
  for (int idx : g.state_index) w.i64(idx);
  w.f64(g.total_energy);
  w.i64(g.iterations);
  w.i64(g.interacting ? 1 : 0);
  for (const Orbital& o : g.orbitals) w.complex_field(o.values);
  w.real_field(g.density.up);
  w.real_field(g.density.down);
  return w.bytes();
}

inline GroundState deserialize_ground_state(const std::string& bytes) {
  checkpoint::Reader r(bytes);
  checkpoint::read_header(r, checkpoint::Kind::ground_state);
  GroundState g;
  g.grid = checkpoint::read_grid(r);
  const auto n_nuclei = r.i64();
  for (std::int64_t i = 0; i < n_nuclei; ++i) {
    Nucleus n;
    n.charge = r.f64();
    n.z = r.f64();
    g.nuclei.push_back(n);
  }
  g.occupation.multiplicity = parse_multiplicity(r.str());
  const auto n_entries = r.i64();
  for (std::int64_t i = 0; i < n_entries; ++i) {
    SpinOrbitalEntry e;
    e.label = r.str();
    e.m = static_cast<int>(r.i64());
    e.spin = r.i64() == 0 ? Spin::up : Spin::down;
    e.occupation = static_cast<int>(r.i64());
    g.occupation.entries.push_back(e);
  }
  g.energies = r.doubles();
  for (std::int64_t i = 0; i < n_entries; ++i) g.state_index.push_back(static_cast<int>(r.i64()));
  g.total_energy = r.f64();
  g.iterations = static_cast<int>(r.i64());
  g.interacting = r.i64() != 0;
  for (const auto& e : g.occupation.entries) {
    Orbital o;
    o.values = r.complex_field();
    o.spin = e.spin;
    o.m = e.m;
    o.label = e.label;
    g.orbitals.push_back(std::move(o));
  }
  g.density.up = r.real_field();
  g.density.down = r.real_field();
  if (!r.at_end()) throw IoError("checkpoint: trailing bytes after ground state");
  return g;
}

/// Propagation checkpoint tagged with the hash of the run's configuration,
/// so a resume under a different configuration is refused.
inline std::string serialize_propagation(const PropagationState& s, const std::string& tag) {
  checkpoint::Writer w;
  checkpoint::write_header(w, checkpoint::Kind::propagation);
  w.str(tag);
  w.i64(s.step);
  w.i64(static_cast<std::int64_t>(s.fields.size()));
  for (const ComplexField& f : s.fields) w.complex_field(f);
  w.doubles(s.absorbed);
  const PopulationTrace& t = s.trace;
  w.i64(static_cast<std::int64_t>(t.labels.size()));
  for (const auto& l : t.labels) w.str(l);
  w.doubles(t.times);
  w.doubles(t.field);
  for (std::size_t i = 0; i < t.samples(); ++i) {
    w.doubles(t.bound[i]);
    w.doubles(t.absorbed[i]);
  }
  w.i64(s.krylov.substeps);
  w.i64(s.krylov.matvecs);
  w.f64(s.krylov.error);
  return w.bytes();
}

inline PropagationState deserialize_propagation(const std::string& bytes, const std::string& tag) {
  checkpoint::Reader r(bytes);
  checkpoint::read_header(r, checkpoint::Kind::propagation);
  const std::string stored = r.str();
  if (stored != tag) throw IoError("checkpoint: written for configuration " + stored + ", not " + tag);
  PropagationState s;
  s.step = r.i64();
  const auto n_fields = r.i64();
  for (std::int64_t i = 0; i < n_fields; ++i) s.fields.push_back(r.complex_field());
  s.absorbed = r.doubles();
  const auto n_labels = r.i64();
  for (std::int64_t i = 0; i < n_labels; ++i) s.trace.labels.push_back(r.str());
  s.trace.times = r.doubles();
  s.trace.field = r.doubles();
  for (std::size_t i = 0; i < s.trace.times.size(); ++i) {
    s.trace.bound.push_back(r.doubles());
    s.trace.absorbed.push_back(r.doubles());
  }
  s.krylov.substeps = static_cast<int>(r.i64());
  s.krylov.matvecs = static_cast<int>(r.i64());
  s.krylov.error = r.f64();
  if (!r.at_end()) throw IoError("checkpoint: trailing bytes after propagation state");
  return s;
}

inline void save_ground_state(const std::filesystem::path& path, const GroundState& g) {
  checkpoint::write_file(path, serialize_ground_state(g));
}

inline GroundState load_ground_state(const std::filesystem::path& path) {
  return deserialize_ground_state(checkpoint::read_file(path));
}

inline void save_propagation(const std::filesystem::path& path, const PropagationState& s,
                             const std::string& tag) {
  checkpoint::write_file(path, serialize_propagation(s, tag));
}

inline PropagationState load_propagation(const std::filesystem::path& path, const std::string& tag) {
  return deserialize_propagation(checkpoint::read_file(path), tag);
}

}  // namespace tddft
