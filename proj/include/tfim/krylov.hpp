#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "tfim/error.hpp"

namespace tfim {

using cd = std::complex<double>;

struct KrylovStats {
  double error_estimate = 0.0;
  int dimension = 0;
};

namespace detail {

// One Lanczos projection; returns false (v untouched) if max_dim was not enough.
template <class Apply>
bool krylov_once(Apply& apply, Eigen::VectorXcd& v, double tau, double tol, int max_dim, KrylovStats& stats) {
  const double beta = v.norm();
  if (beta == 0.0 || tau == 0.0) return true;

  const Eigen::Index n = v.size();
  const int m_cap = static_cast<int>(std::min<Eigen::Index>(max_dim, n));
  std::vector<Eigen::VectorXcd> basis;
  basis.reserve(static_cast<std::size_t>(m_cap));
  basis.push_back(v / beta);
  std::vector<double> alpha;
  std::vector<double> offdiag;
  Eigen::VectorXcd w(n);

  Eigen::VectorXcd coeffs;
  for (int j = 0; j < m_cap; ++j) {
    apply(basis[j], w);
    const double a = basis[j].dot(w).real();
    alpha.push_back(a);
    w -= a * basis[j];
    if (j > 0) w -= offdiag[j - 1] * basis[j - 1];
    for (int k = 0; k <= j; ++k) w -= basis[k].dot(w) * basis[k];
    const double b = w.norm();

    const int m = j + 1;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k < m; ++k) T(k, k) = alpha[k];
    for (int k = 0; k + 1 < m; ++k) T(k, k + 1) = T(k + 1, k) = offdiag[k];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const Eigen::MatrixXd& Q = es.eigenvectors();
    Eigen::VectorXcd phase(m);
    for (int k = 0; k < m; ++k) phase(k) = std::exp(cd(0.0, -tau * es.eigenvalues()(k))) * Q(0, k);
    coeffs = Q.cast<cd>() * phase;

    const bool invariant = b <= 1e-14 * std::max(1.0, std::abs(a));
    const double err = invariant ? 0.0 : beta * b * std::abs(coeffs(m - 1));
    if (invariant || err < tol || m == n) {
      stats.error_estimate += err;
      stats.dimension = std::max(stats.dimension, m);
      v.setZero();
      for (int k = 0; k < m; ++k) v += (beta * coeffs(k)) * basis[k];
      return true;
    }
    if (j + 1 == m_cap) break;
    offdiag.push_back(b);
    basis.push_back(w / b);
  }
  return false;
}

template <class Apply>
void krylov_split(Apply& apply, Eigen::VectorXcd& v, double tau, double tol, int max_dim, int depth,
                  KrylovStats& stats) {
  if (krylov_once(apply, v, tau, tol, max_dim, stats)) return;
  if (depth == 0)
    throw Error(ErrorCategory::propagation, "Krylov exponential did not converge within the maximal subspace dimension");
  krylov_split(apply, v, 0.5 * tau, 0.5 * tol, max_dim, depth - 1, stats);
  krylov_split(apply, v, 0.5 * tau, 0.5 * tol, max_dim, depth - 1, stats);
}

}  // namespace detail

/// v <- exp(-i tau H) v for Hermitian H given matrix-free as apply(in, out).
/// The Lanczos basis grows until the a-posteriori estimate
/// beta * b_m * |e_m^T exp(-i tau T_m) e_1| drops below tol; if max_dim is not
/// enough the interval is halved (up to 8 times) before giving up.
template <class Apply>
KrylovStats krylov_expm(Apply&& apply, Eigen::VectorXcd& v, double tau, double tol = 1e-12, int max_dim = 40) {
  KrylovStats stats;
  detail::krylov_split(apply, v, tau, tol, max_dim, 8, stats);
  return stats;
}

}  // namespace tfim
