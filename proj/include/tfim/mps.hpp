#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <vector>

#include "tfim/error.hpp"
#include "tfim/krylov.hpp"
#include "tfim/lattice.hpp"
#include "tfim/model.hpp"
#include "tfim/observables.hpp"
#include "tfim/schedule.hpp"
#include "tfim/tensor.hpp"

namespace tfim::mps {

/// MPO in chain order; W[k] has legs (left, right, s_out, s_in).
struct MPOOperator {
  std::vector<Tensor> W;

  int bond() const {
    std::size_t b = 1;
    for (const auto& w : W) b = std::max({b, w.dim(0), w.dim(1)});
    return static_cast<int>(b);
  }
};

namespace detail {

inline constexpr int kStart = -1;
inline constexpr int kDone = -2;

// Automaton states on the bond to the right of chain position k (k = -1 is the left edge).
inline std::vector<int> bond_states(int k, int n, const std::vector<int>& last_partner) {
  if (k < 0) return {kStart};
  if (k >= n - 1) return {kDone};
  std::vector<int> states{kStart, kDone};
  for (int p = 0; p <= k; ++p)
    if (last_partner[p] > k) states.push_back(p);
  return states;
}

inline int state_index(const std::vector<int>& states, int label) {
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i] == label) return static_cast<int>(i);
  return -1;
}

inline void add_op(Tensor& w, int l, int r, const double (&op)[2][2], double coef) {
  if (l < 0 || r < 0 || coef == 0.0) return;
  for (std::size_t so = 0; so < 2; ++so)
    for (std::size_t si = 0; si < 2; ++si)
      w({static_cast<std::size_t>(l), static_cast<std::size_t>(r), so, si}) += coef * op[so][si];
}

inline constexpr double kId[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
inline constexpr double kSx[2][2] = {{0.0, 1.0}, {1.0, 0.0}};
inline constexpr double kSz[2][2] = {{-1.0, 0.0}, {0.0, 1.0}};

}  // namespace detail

/// Compiles H = sum J_ab sz_a sz_b + hx sum sx + sum (hz + site_z) sz onto the
/// chain order with a finite-state automaton: each site that still awaits a
/// coupling partner further along the chain keeps its own channel carrying sz.
inline MPOOperator build_mpo(const std::vector<int>& order, const Couplings& c, Fields f) {
  using namespace detail;
  const int n = static_cast<int>(order.size());
  std::vector<int> pos(n);
  for (int k = 0; k < n; ++k) pos[order[k]] = k;
  std::map<std::pair<int, int>, double> coupling;
  std::vector<int> last_partner(n, -1);
  for (const auto& t : c.zz) {
    int p = pos[t.a], q = pos[t.b];
    if (p == q) throw Error(ErrorCategory::domain, "self coupling");
    if (p > q) std::swap(p, q);
    coupling[{p, q}] += t.J;
    last_partner[p] = std::max(last_partner[p], q);
  }
  MPOOperator mpo;
  for (int k = 0; k < n; ++k) {
    const auto left = bond_states(k - 1, n, last_partner);
    const auto right = bond_states(k, n, last_partner);
    Tensor w({left.size(), right.size(), 2, 2});
    const int site = order[k];
    add_op(w, state_index(left, kStart), state_index(right, kStart), kId, 1.0);
    add_op(w, state_index(left, kDone), state_index(right, kDone), kId, 1.0);
    add_op(w, state_index(left, kStart), state_index(right, kDone), kSx, f.hx);
    add_op(w, state_index(left, kStart), state_index(right, kDone), kSz, f.hz + c.site_z[site]);
    add_op(w, state_index(left, kStart), state_index(right, k), kSz, 1.0);
    for (int p = 0; p < k; ++p) {
      const int l = state_index(left, p);
      if (l < 0) continue;
      add_op(w, l, state_index(right, p), kId, 1.0);
      const auto it = coupling.find({p, k});
      if (it != coupling.end()) add_op(w, l, state_index(right, kDone), kSz, it->second);
    }
    mpo.W.push_back(std::move(w));
  }
  return mpo;
}

inline MPOOperator build_mpo(const LatticeSpec& lat, double hx, double hz, int sign) {
  return build_mpo(lat.snake_order, ising_couplings(lat, {1.0, sign}), {hx, hz});
}

/// Dense matrix of an MPO, basis index bit i = site order[k] for chain position k
/// mapped through `order` (bit i of the index is site i).
inline Eigen::MatrixXcd mpo_to_dense(const MPOOperator& mpo, const std::vector<int>& order) {
  const int n = static_cast<int>(mpo.W.size());
  if (n > 12) throw Error(ErrorCategory::resource, "dense MPO reconstruction limited to 12 sites");
  const Eigen::Index dim = Eigen::Index{1} << n;
  Eigen::MatrixXcd h(dim, dim);
  for (Eigen::Index row = 0; row < dim; ++row) {
    for (Eigen::Index col = 0; col < dim; ++col) {
      Eigen::RowVectorXcd v = Eigen::RowVectorXcd::Ones(1);
      for (int k = 0; k < n; ++k) {
        const auto so = static_cast<std::size_t>((row >> order[k]) & 1);
        const auto si = static_cast<std::size_t>((col >> order[k]) & 1);
        const Tensor& w = mpo.W[k];
        Eigen::MatrixXcd m(w.dim(0), w.dim(1));
        for (std::size_t l = 0; l < w.dim(0); ++l)
          for (std::size_t r = 0; r < w.dim(1); ++r) m(l, r) = w({l, r, so, si});
        v = v * m;
      }
      h(row, col) = v(0);
    }
  }
  return h;
}

/// MPS on a chain order; A[k] has legs (left, phys, right). Physical index 0 is
/// spin down. The orthogonality center sits at `center`.
struct MPSState {
  std::vector<Tensor> A;
  std::vector<int> order;
  int chi_max = 64;
  double svd_cutoff = 1e-12;
  int center = 0;
  double eps_accum = 0.0;
  bool padded = false;  // bonds held at full size; no cutoff pruning

  int length() const { return static_cast<int>(A.size()); }
  int max_bond() const {
    std::size_t b = 1;
    for (const auto& t : A) b = std::max(b, t.dim(2));
    return static_cast<int>(b);
  }
};

/// All-down product state. With `pad` the bonds start at their full size
/// min(2^k, 2^(n-k), chi_max), the extra directions carrying zero weight, so
/// the two-site projector is the identity wherever chi_max allows it.
/// Without `pad` bonds start at 1 and grow adaptively under svd_cutoff.
inline MPSState init_polarized(const std::vector<int>& order, int chi_max, double svd_cutoff = 1e-12,
                               bool pad = true) {
  if (chi_max < 1) throw Error(ErrorCategory::config, "chi_max must be positive");
  MPSState s;
  s.order = order;
  s.chi_max = chi_max;
  s.svd_cutoff = svd_cutoff;
  s.padded = pad;
  const int n = static_cast<int>(order.size());
  auto bond = [&](int k) -> std::size_t {  // bond to the right of position k
    if (!pad || k < 0 || k >= n - 1) return 1;
    const int e = std::min(k + 1, n - k - 1);
    const auto cap = static_cast<std::size_t>(chi_max);
    return e >= 30 ? cap : std::min(std::size_t{1} << e, cap);
  };
  for (int k = 0; k < n; ++k) {
    const std::size_t dl = bond(k - 1), dr = bond(k);
    Tensor t({dl, 2, dr});
    for (std::size_t a = 0; a < dl; ++a) t.data()[a * 2 * dr + a] = 1.0;
    s.A.push_back(std::move(t));
  }
  return s;
}

/// Amplitudes in the dense basis (bit i = site i).
inline Eigen::VectorXcd to_dense(const MPSState& s) {
  const int n = s.length();
  if (n > 20) throw Error(ErrorCategory::memory_guard, "dense conversion limited to 20 sites");
  Tensor acc = s.A[0];  // (1, 2, D)
  acc = acc.reshape({2, acc.dim(2)});
  for (int k = 1; k < n; ++k) {
    acc = contract(acc, {static_cast<int>(acc.rank()) - 1}, s.A[k], {0});
  }
  // legs: s_{order[0]}, ..., s_{order[n-1]}, 1
  const Eigen::Index dim = Eigen::Index{1} << n;
  Eigen::VectorXcd v(dim);
  for (Eigen::Index b = 0; b < dim; ++b) {
    std::size_t off = 0;
    for (int k = 0; k < n; ++k) off = off * 2 + static_cast<std::size_t>((b >> s.order[k]) & 1);
    v(b) = acc.data()[off];
  }
  return v;
}

/// Largest deviation of the gauge conditions from identity around the center.
inline double isometry_defect(const MPSState& s) {
  double worst = 0.0;
  for (int k = 0; k < s.length(); ++k) {
    if (k == s.center) continue;
    const Tensor& a = s.A[k];
    if (k < s.center) {
      const auto m = a.matrix(a.dim(0) * 2);  // (Dl*2) x Dr
      const RowMatrix g = m.adjoint() * m;
      worst = std::max(worst, (g - RowMatrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
    } else {
      const auto m = a.matrix(a.dim(0));  // Dl x (2*Dr)
      const RowMatrix g = m * m.adjoint();
      worst = std::max(worst, (g - RowMatrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

namespace detail {

inline Tensor unit_env() { return Tensor({1, 1, 1}, {cd(1.0)}); }

// L(a', w, a): bra, mpo, ket.
inline Tensor grow_left(const Tensor& L, const Tensor& A, const Tensor& W) {
  Tensor x = contract(L, {2}, A, {0});        // a', w, s, b
  x = contract(x, {1, 2}, W, {0, 3});           // a', b, wr, so
  x = contract(x, {0, 3}, A.conj(), {0, 1});    // b, wr, b'
  return x.permute({2, 1, 0});
}

// R(b', w, b): bra, mpo, ket.
inline Tensor grow_right(const Tensor& R, const Tensor& A, const Tensor& W) {
  Tensor x = contract(A, {2}, R, {2});          // a, s, b', w
  x = contract(x, {1, 3}, W, {3, 1});           // a, b', wl, so
  x = contract(x, {1, 3}, A.conj(), {2, 1});    // a, wl, a'
  return x.permute({2, 1, 0});
}

inline Tensor apply_two_site(const Tensor& L, const Tensor& W1, const Tensor& W2, const Tensor& R, const Tensor& theta) {
  Tensor x = contract(L, {2}, theta, {0});      // a', w, s1, s2, b
  x = contract(x, {1, 2}, W1, {0, 3});          // a', s2, b, w1, s1'
  x = contract(x, {3, 1}, W2, {0, 3});          // a', b, s1', w2, s2'
  x = contract(x, {1, 3}, R, {2, 1});           // a', s1', s2', b'
  return x;
}

inline Tensor apply_one_site(const Tensor& L, const Tensor& W, const Tensor& R, const Tensor& c) {
  Tensor x = contract(L, {2}, c, {0});          // a', w, s, b
  x = contract(x, {1, 2}, W, {0, 3});           // a', b, wr, s'
  x = contract(x, {1, 2}, R, {2, 1});           // a', s', b'
  return x;
}

template <class Apply>
Tensor evolve_local(Apply&& apply, const Tensor& t, double tau) {
  Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(t.data().data(), static_cast<Eigen::Index>(t.size()));
  const Shape shape = t.shape();
  krylov_expm(
      [&](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) {
        Tensor x(shape, std::vector<cd>(in.data(), in.data() + in.size()));
        Tensor y = apply(x);
        out = Eigen::Map<const Eigen::VectorXcd>(y.data().data(), static_cast<Eigen::Index>(y.size()));
      },
      v, tau, 1e-12, 40);
  return Tensor(shape, std::vector<cd>(v.data(), v.data() + v.size()));
}

struct Split {
  Tensor left;   // (a, s1, chi)
  Tensor right;  // (chi, s2, b)
  double discarded;
};

// SVD of theta(a, s1, s2, b); the singular values are absorbed left or right.
inline Split split_two_site(const Tensor& theta, int chi_max, double cutoff, bool absorb_left) {
  const std::size_t a = theta.dim(0), b = theta.dim(3);
  const SvdResult f = svd(theta.matrix(a * 2));
  const Eigen::Index total = f.S.size();
  Eigen::Index keep = std::min<Eigen::Index>(chi_max, total);
  if (cutoff > 0.0 && total > 0) {
    Eigen::Index k = 1;
    while (k < keep && f.S(k) > cutoff * f.S(0)) ++k;
    keep = k;
  }
  const double all = f.S.squaredNorm();
  const double kept = f.S.head(keep).squaredNorm();
  Split out;
  out.discarded = all > 0.0 ? std::max(0.0, (all - kept) / all) : 0.0;
  Eigen::VectorXd s = f.S.head(keep);
  if (kept > 0.0) s /= std::sqrt(kept);
  RowMatrix u = f.U.leftCols(keep);
  RowMatrix vh = f.Vh.topRows(keep);
  if (absorb_left) u = u * s.cast<cd>().asDiagonal();
  else vh = s.cast<cd>().asDiagonal() * vh;
  const auto chi = static_cast<std::size_t>(keep);
  out.left = Tensor::from_matrix(u, {a, 2, chi});
  out.right = Tensor::from_matrix(vh, {chi, 2, b});
  return out;
}

}  // namespace detail

/// Moves the orthogonality center to position 0 with QR sweeps (no truncation).
inline void right_canonicalize(MPSState& s) {
  for (int k = s.length() - 1; k > 0; --k) {
    Tensor& a = s.A[k];
    const std::size_t dl = a.dim(0), dr = a.dim(2);
    // A = L Q with Q right-orthonormal: take QR of A^dagger.
    const RowMatrix m = a.matrix(dl);
    auto [q, r] = thin_qr(m.adjoint());
    const RowMatrix qd = q.adjoint();  // (k x 2dr)
    const RowMatrix l = r.adjoint();   // (dl x k)
    const auto kdim = static_cast<std::size_t>(qd.rows());
    a = Tensor::from_matrix(qd, {kdim, 2, dr});
    Tensor lt = Tensor::from_matrix(l, {dl, kdim});
    s.A[k - 1] = contract(s.A[k - 1], {2}, lt, {0});
  }
  s.center = 0;
}

/// One symmetric two-site TDVP sweep (left-to-right then right-to-left, each
/// with dt/2). Returns the summed discarded weight of all truncations.
inline double tdvp2_step(MPSState& s, const MPOOperator& mpo, double dt) {
  using namespace detail;
  const int n = s.length();
  if (static_cast<int>(mpo.W.size()) != n) throw Error(ErrorCategory::domain, "MPO length differs from MPS");
  if (s.center != 0) right_canonicalize(s);
  if (n == 1) {
    const Tensor L = unit_env(), R = unit_env();
    s.A[0] = evolve_local([&](const Tensor& x) { return apply_one_site(L, mpo.W[0], R, x); }, s.A[0], dt);
    return 0.0;
  }
  const double tau = 0.5 * dt;
  std::vector<Tensor> Lenv(n + 1), Renv(n + 1);
  Lenv[0] = unit_env();
  Renv[n] = unit_env();
  for (int k = n - 1; k >= 1; --k) Renv[k] = grow_right(Renv[k + 1], s.A[k], mpo.W[k]);

  double eps = 0.0;
  for (int k = 0; k <= n - 2; ++k) {
    Tensor theta = contract(s.A[k], {2}, s.A[k + 1], {0});
    theta = evolve_local(
        [&](const Tensor& x) { return apply_two_site(Lenv[k], mpo.W[k], mpo.W[k + 1], Renv[k + 2], x); }, theta, tau);
    Split sp = split_two_site(theta, s.chi_max, s.padded ? 0.0 : s.svd_cutoff, false);
    eps += sp.discarded;
    s.A[k] = std::move(sp.left);
    Lenv[k + 1] = grow_left(Lenv[k], s.A[k], mpo.W[k]);
    if (k < n - 2) {
      s.A[k + 1] = evolve_local(
          [&](const Tensor& x) { return apply_one_site(Lenv[k + 1], mpo.W[k + 1], Renv[k + 2], x); }, sp.right, -tau);
    } else {
      s.A[k + 1] = std::move(sp.right);
    }
  }
  for (int k = n - 2; k >= 0; --k) {
    Tensor theta = contract(s.A[k], {2}, s.A[k + 1], {0});
    theta = evolve_local(
        [&](const Tensor& x) { return apply_two_site(Lenv[k], mpo.W[k], mpo.W[k + 1], Renv[k + 2], x); }, theta, tau);
    Split sp = split_two_site(theta, s.chi_max, s.padded ? 0.0 : s.svd_cutoff, true);
    eps += sp.discarded;
    s.A[k + 1] = std::move(sp.right);
    Renv[k + 1] = grow_right(Renv[k + 2], s.A[k + 1], mpo.W[k + 1]);
    if (k > 0) {
      s.A[k] = evolve_local([&](const Tensor& x) { return apply_one_site(Lenv[k], mpo.W[k], Renv[k + 1], x); },
                            sp.left, -tau);
    } else {
      s.A[k] = std::move(sp.left);
    }
  }
  s.center = 0;
  s.eps_accum += eps;
  return eps;
}

struct Measurement {
  std::vector<double> mag;  // by site
  Eigen::MatrixXd zz;       // raw <sz_a sz_b> by site
};

/// Exact one- and two-point sz expectation values by transfer matrices.
inline Measurement measure(const MPSState& s) {
  const int n = s.length();
  auto slice = [](const Tensor& a, std::size_t phys) {
    const std::size_t dl = a.dim(0), dr = a.dim(2);
    Eigen::MatrixXcd m(dl, dr);
    for (std::size_t i = 0; i < dl; ++i)
      for (std::size_t j = 0; j < dr; ++j) m(i, j) = a({i, phys, j});
    return m;
  };
  std::vector<std::array<Eigen::MatrixXcd, 2>> As(n);
  for (int k = 0; k < n; ++k) As[k] = {slice(s.A[k], 0), slice(s.A[k], 1)};
  // E(bra, ket) from the left, F(ket, bra) from the right.
  auto left = [&](const Eigen::MatrixXcd& E, int k, double d0, double d1) -> Eigen::MatrixXcd {
    return d0 * (As[k][0].adjoint() * E * As[k][0]) + d1 * (As[k][1].adjoint() * E * As[k][1]);
  };
  std::vector<Eigen::MatrixXcd> F(n + 1);
  F[n] = Eigen::MatrixXcd::Ones(1, 1);
  for (int k = n - 1; k >= 0; --k)
    F[k] = As[k][0] * F[k + 1] * As[k][0].adjoint() + As[k][1] * F[k + 1] * As[k][1].adjoint();
  const double norm = F[0].trace().real();
  Measurement m;
  m.mag.assign(n, 0.0);
  m.zz = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXcd E = Eigen::MatrixXcd::Ones(1, 1);
  for (int p = 0; p < n; ++p) {
    Eigen::MatrixXcd X = left(E, p, -1.0, 1.0);
    m.mag[s.order[p]] = (X * F[p + 1]).trace().real() / norm;
    for (int q = p + 1; q < n; ++q) {
      const double v = (left(X, q, -1.0, 1.0) * F[q + 1]).trace().real() / norm;
      m.zz(s.order[p], s.order[q]) = m.zz(s.order[q], s.order[p]) = v;
      if (q + 1 < n) X = left(X, q, 1.0, 1.0);
    }
    E = left(E, p, 1.0, 1.0);
  }
  return m;
}

struct RunOptions {
  IsingParams ising{};
  int chi_max = 64;
  double svd_cutoff = 1e-12;
  bool pad_bonds = true;
};

/// Two-site TDVP through a schedule; the MPO is rebuilt at each step's
/// midpoint. error_record carries eps_accum.
inline ObservableSeries run_protocol(const LatticeSpec& lat, const Schedule& schedule, double dt,
                                     const std::vector<double>& t_record, const RunOptions& opt,
                                     MPSState* final_state = nullptr) {
  if (!(dt > 0.0) || dt > 0.05) throw Error(ErrorCategory::domain, "MPS engine requires 0 < dt <= 0.05");
  if (opt.chi_max > 256) throw Error(ErrorCategory::config, "chi_max is capped at 256");
  const Couplings couplings = ising_couplings(lat, opt.ising);
  MPSState psi = init_polarized(lat.snake_order, opt.chi_max, opt.svd_cutoff, opt.pad_bonds);
  ObservableSeries series = make_series("mps", lat, schedule.descriptor(), dt);
  const auto grid = step_grid(t_record, dt);
  std::size_t next = 0;
  auto flush = [&](double t) {
    while (next < t_record.size() && t_record[next] == t) {
      const Measurement m = measure(psi);
      append_record(series, lat, t, m.mag, [&](int a, int b) { return m.zz(a, b); }, psi.eps_accum);
      ++next;
    }
  };
  flush(0.0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const MPOOperator mpo = build_mpo(psi.order, couplings, schedule.eval(0.5 * (grid[k - 1] + grid[k])));
    tdvp2_step(psi, mpo, grid[k] - grid[k - 1]);
    flush(grid[k]);
  }
  if (final_state) *final_state = std::move(psi);
  return series;
}

}  // namespace tfim::mps
