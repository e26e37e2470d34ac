#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "field.hpp"

namespace tddft {

struct EigenOptions {
  int n_wanted = 1;
  /// Largest Krylov basis before a thick restart; 0 picks a size from n_wanted.
  int max_basis = 0;
  /// Bound on the residual norm ||A x - theta x|| of every wanted pair.
  double tolerance = 1e-10;
  /// Pairs beyond the lowest n_strict only need loose_tolerance; they serve
  /// as guards on the spectrum above the wanted states. 0 means all strict.
  int n_strict = 0;
  double loose_tolerance = 1e-2;
  int max_matvecs = 400000;
  unsigned seed = 12345;
};

struct EigenResult {
  Eigen::VectorXd values;
  /// Orthonormal eigenvectors, one per column.
  Eigen::MatrixXd vectors;
  Eigen::VectorXd residuals;
  int matvecs = 0;
  int restarts = 0;
  bool converged = false;
};

/// Lowest eigenpairs of a real symmetric operator by thick-restart Lanczos
/// with full reorthogonalisation.
///
/// `apply(x, y)` writes A x into y. The columns of `guess` are summed (plus a
/// little seeded noise) into a single start vector;
/// when it is empty a seeded random start vector is used.
class ThickRestartLanczos {
 public:
  using Operator = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

  ThickRestartLanczos(Operator apply, Eigen::Index dimension)
      : apply_(std::move(apply)), n_(dimension) {}

  EigenResult solve(const EigenOptions& options, const Eigen::MatrixXd& guess = {}) {
    const int nev = options.n_wanted;
    if (nev < 1 || nev > n_) throw std::invalid_argument("Lanczos: bad number of wanted pairs");
    int m = options.max_basis > 0 ? options.max_basis : std::max(2 * nev + 30, 50);
    m = static_cast<int>(std::min<Eigen::Index>(m, n_));
    const int keep = std::max(nev, std::min(m - 2, nev + (m - nev) / 2));

    basis_.resize(n_, m);
    image_.resize(n_, m);
    std::mt19937 rng(options.seed);
    std::normal_distribution<double> normal;

    // A single start vector keeps the basis a true Krylov space, which the
    // thick restart relies on; guesses are summed into it.
    EigenResult result;
    int k = 0;
    Eigen::VectorXd start = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index c = 0; c < guess.cols(); ++c) {
      const double norm = guess.col(c).norm();
      if (norm > 0.0) start += guess.col(c) / norm;
    }
    Eigen::VectorXd noise(n_);
    for (Eigen::Index i = 0; i < n_; ++i) noise(i) = normal(rng);
    start += (guess.cols() > 0 ? 1e-3 : 1.0) * noise / noise.norm() * std::max(1.0, start.norm());
    orthonormalise(start, 0);
    push(start, k, result);
    Eigen::VectorXd next = image_.col(0);

    while (true) {
      // Extend the basis.
      while (k < m) {
        if (!orthonormalise(next, k)) {
          for (Eigen::Index i = 0; i < n_; ++i) next(i) = normal(rng);
          if (!orthonormalise(next, k)) break;
        }
        push(next, k, result);
        next = image_.col(k - 1);
      }

      // Rayleigh-Ritz on the whole basis.
      Eigen::MatrixXd projected = basis_.leftCols(k).transpose() * image_.leftCols(k);
      projected = 0.5 * (projected + projected.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(projected);
      const int want = std::min(nev, k);
      const Eigen::MatrixXd y = eig.eigenvectors();
      const Eigen::MatrixXd ritz = basis_.leftCols(k) * y.leftCols(want);
      const Eigen::MatrixXd ritz_image = image_.leftCols(k) * y.leftCols(want);
      Eigen::VectorXd residuals(want);
      for (int i = 0; i < want; ++i)
        residuals(i) = (ritz_image.col(i) - eig.eigenvalues()(i) * ritz.col(i)).norm();

      auto meets = [&](const Eigen::VectorXd& res) {
        if (want != nev) return false;
        const int strict = options.n_strict > 0 ? std::min(options.n_strict, nev) : nev;
        for (int i = 0; i < want; ++i)
          if (res(i) > (i < strict ? options.tolerance : options.loose_tolerance)) return false;
        return true;
      };
      const bool done = meets(residuals);
      if (done || result.matvecs >= options.max_matvecs || k == n_) {
        result.values = eig.eigenvalues().head(want);
        result.vectors = ritz;
        result.residuals = residuals;
        result.converged = done;
        return result;
      }

      // Lanczos continuation vector, orthogonal to the current basis.
      next = image_.col(k - 1);
      orthogonalise(next, k);

      const int kept = std::min(keep, k - 1);
      const Eigen::MatrixXd yk = y.leftCols(kept);
      Eigen::MatrixXd new_basis = basis_.leftCols(k) * yk;
      Eigen::MatrixXd new_image = image_.leftCols(k) * yk;
      basis_.leftCols(kept) = new_basis;
      image_.leftCols(kept) = new_image;
      k = kept;
      ++result.restarts;
    }
  }

 private:
  void orthogonalise(Eigen::VectorXd& v, int k) const {
    if (k == 0) return;
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd c = basis_.leftCols(k).transpose() * v;
      v.noalias() -= basis_.leftCols(k) * c;
    }
  }

  bool orthonormalise(Eigen::VectorXd& v, int k) const {
    const double before = v.norm();
    if (before == 0.0) return false;
    orthogonalise(v, k);
    const double after = v.norm();
    if (after <= 1e-10 * before) return false;
    v /= after;
    return true;
  }

  void push(const Eigen::VectorXd& v, int& k, EigenResult& result) {
    basis_.col(k) = v;
    Eigen::VectorXd av(n_);
    apply_(v, av);
    ++result.matvecs;
    image_.col(k) = av;
    ++k;
  }

  Operator apply_;
  Eigen::Index n_;
  Eigen::MatrixXd basis_;
  Eigen::MatrixXd image_;
};

}  // namespace tddft
