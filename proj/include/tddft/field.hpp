#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tddft {

using complex = std::complex<double>;

/// Scalar field sampled on the (z, rho) grid; rows index z, columns index rho.
using RealField = Eigen::MatrixXd;
using ComplexField = Eigen::MatrixXcd;

enum class Spin { up = 0, down = 1 };

inline const char* to_string(Spin s) { return s == Spin::up ? "up" : "down"; }

inline int spin_index(Spin s) { return static_cast<int>(s); }

/// Thrown when field or grid shapes do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterative numerical method fails to reach its tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Kohn-Sham spin-orbital on the cylindrical grid. The azimuthal factor
/// exp(i m phi) is kept analytic, so values hold only the (z, rho) part.
struct Orbital {
  ComplexField values;
  Spin spin = Spin::up;
  int m = 0;
  std::string label;
};

}  // namespace tddft
