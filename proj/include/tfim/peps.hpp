#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tfim/error.hpp"
#include "tfim/exact.hpp"
#include "tfim/lattice.hpp"
#include "tfim/model.hpp"
#include "tfim/observables.hpp"
#include "tfim/schedule.hpp"
#include "tfim/tensor.hpp"

namespace tfim::peps {

/// One tensor per site with legs [phys, incident edges in increasing edge order].
/// Physical index 0 is spin down.
struct PEPSState {
  LatticeSpec lat;
  std::vector<Tensor> T;
  std::vector<std::vector<int>> inc;  // incident edge indices per site
  std::vector<std::size_t> bond;      // bond dimension per edge
  int chi2d = 8;

  int num_sites() const { return lat.num_sites(); }

  int leg_of(int site, int edge) const {
    const auto& v = inc[site];
    for (std::size_t k = 0; k < v.size(); ++k)
      if (v[k] == edge) return static_cast<int>(k) + 1;
    throw Error(ErrorCategory::domain, "edge is not incident to site");
  }

  int other_end(int site, int edge) const {
    const Edge& e = lat.nn_edges[edge];
    return e.a == site ? e.b : e.a;
  }

  int edge_between(int a, int b) const {
    for (int e : inc[a])
      if (other_end(a, e) == b) return e;
    return -1;
  }
};

inline PEPSState init_polarized(const LatticeSpec& lat, int chi2d) {
  if (chi2d < 1) throw Error(ErrorCategory::config, "chi2d must be positive");
  PEPSState s;
  s.lat = lat;
  s.chi2d = chi2d;
  s.inc.assign(lat.num_sites(), {});
  for (std::size_t e = 0; e < lat.nn_edges.size(); ++e) {
    s.inc[lat.nn_edges[e].a].push_back(static_cast<int>(e));
    s.inc[lat.nn_edges[e].b].push_back(static_cast<int>(e));
  }
  s.bond.assign(lat.nn_edges.size(), 1);
  for (int i = 0; i < lat.num_sites(); ++i) {
    Shape sh{2};
    sh.resize(1 + s.inc[i].size(), 1);
    Tensor t(sh);
    t.data()[0] = 1.0;
    s.T.push_back(std::move(t));
  }
  return s;
}

struct BPOptions {
  double tol = 1e-10;
  int max_iter = 500;
  double damping = 0.5;
};

/// Messages per edge: msg[e][0] flows a -> b, msg[e][1] flows b -> a. Each is a
/// (ket, bra) matrix, Hermitian PSD with unit trace.
struct BPMessages {
  std::vector<std::array<RowMatrix, 2>> msg;
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;  // one entry per sweep of the last fixed-point solve
};

inline const RowMatrix& incoming(const PEPSState& s, const BPMessages& m, int site, int edge) {
  return m.msg[edge][s.lat.nn_edges[edge].b == site ? 0 : 1];
}


inline BPMessages init_messages(const PEPSState& s) {
  BPMessages m;
  m.msg.resize(s.bond.size());
  for (std::size_t e = 0; e < s.bond.size(); ++e) {
    const auto d = static_cast<Eigen::Index>(s.bond[e]);
    const RowMatrix id = RowMatrix::Identity(d, d) / static_cast<double>(d);
    m.msg[e] = {id, id};
  }
  return m;
}

namespace detail {

inline Tensor as_tensor(const RowMatrix& m) {
  return Tensor::from_matrix(m, {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
}

// T'(.., i', ..) = sum_i mat(i', i) T(.., i, ..) on leg `leg`.
inline Tensor apply_leg(const Tensor& t, int leg, const RowMatrix& mat) {
  Tensor x = contract(as_tensor(mat), {1}, t, {leg});  // i', rest...
  std::vector<int> perm;
  for (int k = 1; k <= leg; ++k) perm.push_back(k);
  perm.push_back(0);
  for (int k = leg + 1; k < static_cast<int>(t.rank()); ++k) perm.push_back(k);
  return x.permute(perm);
}

}  // namespace detail

/// Double-layer site tensor with the incoming messages absorbed on every leg
/// except `open_edge` (-1 for none). Result legs (p_ket, p_bra) or
/// (p_ket, p_bra, e_ket, e_bra).
inline Tensor site_environment(const PEPSState& s, const BPMessages& m, int site, int open_edge,
                               const Tensor* ket = nullptr) {
  const Tensor& T = ket ? *ket : s.T[site];
  std::vector<int> order{0};
  const int open_leg = open_edge >= 0 ? s.leg_of(site, open_edge) : -1;
  if (open_leg > 0) order.push_back(open_leg);
  std::vector<int> others;
  for (std::size_t k = 0; k < s.inc[site].size(); ++k)
    if (static_cast<int>(k) + 1 != open_leg) {
      order.push_back(static_cast<int>(k) + 1);
      others.push_back(s.inc[site][k]);
    }
  const Tensor tp = T.permute(order);
  const Tensor bp = tp.conj();
  const int first = open_leg > 0 ? 2 : 1;
  Tensor k = tp;
  for (int e : others) k = contract(k, {first}, detail::as_tensor(incoming(s, m, site, e)), {0});
  std::vector<int> axes;
  for (std::size_t j = 0; j < others.size(); ++j) axes.push_back(first + static_cast<int>(j));
  Tensor x = contract(k, axes, bp, axes);
  if (open_leg > 0) return x.permute({0, 2, 1, 3});
  return x;
}

inline RowMatrix normalized_psd(const RowMatrix& raw) {
  RowMatrix h = 0.5 * (raw + raw.adjoint());
  const double tr = h.trace().real();
  if (!(tr > 0.0) || !std::isfinite(tr))
    throw Error(ErrorCategory::bp_convergence, "message with non-positive trace");
  return h / tr;
}

inline RowMatrix bp_update(const PEPSState& s, const BPMessages& m, int from, int edge) {
  const Tensor x = site_environment(s, m, from, edge);
  const std::size_t d = x.dim(2);
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) out(a, b) += x({p, p, a, b});
  return normalized_psd(out);
}

/// Damped parallel BP sweeps until the largest message change drops below tol.
/// `warm` seeds the iteration; entries whose shape no longer matches are reset.
inline BPMessages bp_fixed_point(const PEPSState& s, const BPOptions& opt = {}, const BPMessages* warm = nullptr) {
  if (!(opt.tol > 0.0)) throw Error(ErrorCategory::config, "BP tolerance must be positive");
  BPMessages m = init_messages(s);
  if (warm && warm->msg.size() == m.msg.size()) {
    for (std::size_t e = 0; e < m.msg.size(); ++e)
      for (int d = 0; d < 2; ++d)
        if (warm->msg[e][d].rows() == m.msg[e][d].rows()) m.msg[e][d] = warm->msg[e][d];
  }
  const auto& edges = s.lat.nn_edges;
  m.residual = edges.empty() ? 0.0 : 1.0;
  m.iterations = 0;
  m.residual_history.clear();
  while (m.residual >= opt.tol) {
    if (m.iterations >= opt.max_iter)
      throw Error(ErrorCategory::bp_convergence,
                  "belief propagation did not converge; residual " + format_double(m.residual));
    BPMessages next = m;
    double res = 0.0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const int ends[2] = {edges[e].a, edges[e].b};
      for (int d = 0; d < 2; ++d) {
        const RowMatrix upd = bp_update(s, m, ends[d], static_cast<int>(e));
        const RowMatrix mixed = normalized_psd((1.0 - opt.damping) * upd + opt.damping * m.msg[e][d]);
        res = std::max(res, (mixed - m.msg[e][d]).cwiseAbs().maxCoeff());
        next.msg[e][d] = mixed;
      }
    }
    next.iterations = m.iterations + 1;
    next.residual = res;
    next.residual_history.push_back(res);
    m = std::move(next);
  }
  return m;
}

namespace detail {

struct Sqrt {
  RowMatrix s;
  RowMatrix inv;
};

// Square root of a PSD message and its inverse, eigenvalues floored at 1e-12 of the largest.
inline Sqrt message_sqrt(const RowMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Eigen::MatrixXcd(0.5 * (m + m.adjoint())));
  if (es.info() != Eigen::Success) throw Error(ErrorCategory::gate, "environment eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  const double top = lam.maxCoeff();
  if (!(top > 0.0)) throw Error(ErrorCategory::gate, "environment has no positive weight");
  for (Eigen::Index k = 0; k < lam.size(); ++k) lam(k) = std::max(lam(k), 1e-12 * top);
  const Eigen::MatrixXcd& v = es.eigenvectors();
  Sqrt out;
  out.s = v * lam.cwiseSqrt().cast<cd>().asDiagonal() * v.adjoint();
  out.inv = v * lam.cwiseSqrt().cwiseInverse().cast<cd>().asDiagonal() * v.adjoint();
  return out;
}

struct Reduced {
  Tensor q;                  // (ext legs..., r)
  RowMatrix r;               // r x (2 * D_e)
  std::vector<int> ext_edges;
  std::vector<RowMatrix> inv;  // S^-1 per external edge
};

// Conditions the external legs with the message square roots and QR-splits
// off the (phys, edge) part.
inline Reduced reduce_site(const PEPSState& s, const BPMessages& m, int site, int edge) {
  Reduced out;
  Tensor t = s.T[site];
  std::vector<int> order;
  for (std::size_t k = 0; k < s.inc[site].size(); ++k) {
    const int e = s.inc[site][k];
    if (e == edge) continue;
    const Sqrt sq = message_sqrt(incoming(s, m, site, e));
    t = apply_leg(t, static_cast<int>(k) + 1, sq.s.transpose());
    out.ext_edges.push_back(e);
    out.inv.push_back(sq.inv);
    order.push_back(static_cast<int>(k) + 1);
  }
  const int leg = s.leg_of(site, edge);
  order.push_back(0);
  order.push_back(leg);
  const Tensor tp = t.permute(order);
  const std::size_t cols = 2 * s.bond[edge];
  const std::size_t rows = tp.size() / cols;
  auto [q, r] = thin_qr(tp.matrix(rows));
  Shape qs(tp.shape().begin(), tp.shape().end() - 2);
  qs.push_back(static_cast<std::size_t>(q.cols()));
  out.q = Tensor::from_matrix(q, qs);
  out.r = r;
  return out;
}

// Rebuilds a site tensor from q (ext..., r) and the new core (r, phys, chi),
// undoing the conditioning and restoring the canonical leg order.
inline Tensor restore_site(const PEPSState& s, int site, int edge, const Reduced& red, const Tensor& core) {
  Tensor t = contract(red.q, {static_cast<int>(red.q.rank()) - 1}, core, {0});  // ext..., phys, chi
  for (std::size_t j = 0; j < red.ext_edges.size(); ++j) t = apply_leg(t, static_cast<int>(j), red.inv[j].transpose());
  // current legs: ext edges (in inc order), phys, edge
  const int n_ext = static_cast<int>(red.ext_edges.size());
  std::vector<int> perm{n_ext};
  int ext = 0;
  for (int e : s.inc[site]) perm.push_back(e == edge ? n_ext + 1 : ext++);
  return t.permute(perm);
}

}  // namespace detail

/// Applies a two-site gate on `edge`; gate(po * 2 + qo, p * 2 + q) with p on
/// the edge's first site. Returns the discarded weight eps_gate with the
/// singular values normalized to unit total weight before truncation.
inline double apply_gate(PEPSState& s, BPMessages& m, int edge, const Eigen::Matrix4cd& gate) {
  const Edge& ed = s.lat.nn_edges[edge];
  const detail::Reduced ru = detail::reduce_site(s, m, ed.a, edge);
  const detail::Reduced rv = detail::reduce_site(s, m, ed.b, edge);
  const std::size_t De = s.bond[edge];
  const auto nu = static_cast<std::size_t>(ru.r.rows());
  const auto nv = static_cast<std::size_t>(rv.r.rows());
  const Tensor Ru = Tensor::from_matrix(ru.r, {nu, 2, De});
  const Tensor Rv = Tensor::from_matrix(rv.r, {nv, 2, De});
  Tensor theta = contract(Ru, {2}, Rv, {2});  // ru, p, rv, q
  RowMatrix g = gate;
  const Tensor G = Tensor::from_matrix(g, {2, 2, 2, 2});
  theta = contract(theta, {1, 3}, G, {2, 3}).permute({0, 2, 1, 3});  // ru, po, rv, qo
  const SvdResult f = svd(theta.matrix(nu * 2));
  if (!f.S.allFinite()) throw Error(ErrorCategory::gate, "non-finite singular values in gate update");
  const double total = f.S.squaredNorm();
  if (!(total > 0.0)) throw Error(ErrorCategory::gate, "gate update annihilated the state");
  const Eigen::VectorXd sig = f.S / std::sqrt(total);
  Eigen::Index nonzero = 0;
  while (nonzero < sig.size() && sig(nonzero) > 1e-13 * sig(0)) ++nonzero;
  const Eigen::Index keep = std::max<Eigen::Index>(1, std::min<Eigen::Index>(s.chi2d, nonzero));
  double eps = 0.0;
  for (Eigen::Index k = keep; k < nonzero; ++k) eps += sig(k) * sig(k);
  Eigen::VectorXd kept = sig.head(keep);
  kept /= kept.norm();
  const Eigen::VectorXcd root = kept.cwiseSqrt().cast<cd>();
  const auto chi = static_cast<std::size_t>(keep);
  const RowMatrix left = f.U.leftCols(keep) * root.asDiagonal();
  const RowMatrix right = root.asDiagonal() * f.Vh.topRows(keep);
  const Tensor core_u = Tensor::from_matrix(left, {nu, 2, chi});
  const Tensor core_v = Tensor::from_matrix(right, {chi, nv, 2}).permute({1, 2, 0});
  Tensor tu = detail::restore_site(s, ed.a, edge, ru, core_u);
  Tensor tv = detail::restore_site(s, ed.b, edge, rv, core_v);
  if (!std::isfinite(tu.norm()) || !std::isfinite(tv.norm()))
    throw Error(ErrorCategory::gate, "non-finite tensor after gate update");
  s.T[ed.a] = std::move(tu);
  s.T[ed.b] = std::move(tv);
  s.bond[edge] = chi;
  const RowMatrix diag = (kept.cast<cd>() / kept.sum()).asDiagonal();
  m.msg[edge] = {diag, diag};
  return eps;
}

/// Applies a one-site gate gate(po, p); messages are unaffected.
inline void apply_one_site(PEPSState& s, int site, const Eigen::Matrix2cd& gate) {
  s.T[site] = detail::apply_leg(s.T[site], 0, RowMatrix(gate));
}

inline Eigen::Matrix2cd field_gate(double hx, double hz, double tau) {
  // exp(-i tau (hx sx + hz sz)) with sz = diag(-1, 1)
  const double w = std::hypot(hx, hz);
  Eigen::Matrix2cd g = Eigen::Matrix2cd::Identity();
  if (w == 0.0) return g;
  const double c = std::cos(w * tau), sn = std::sin(w * tau) / w;
  g(0, 0) = cd(c, sn * hz);
  g(1, 1) = cd(c, -sn * hz);
  g(0, 1) = g(1, 0) = cd(0.0, -sn * hx);
  return g;
}

inline Eigen::Matrix4cd zz_gate(double J, double tau) {
  Eigen::Matrix4cd g = Eigen::Matrix4cd::Zero();
  for (int p = 0; p < 2; ++p)
    for (int q = 0; q < 2; ++q) {
      const double zz = (p ? 1.0 : -1.0) * (q ? 1.0 : -1.0);
      g(p * 2 + q, p * 2 + q) = std::exp(cd(0.0, -J * tau * zz));
    }
  return g;
}

/// Horizontal even/odd, vertical even/odd: four sets of disjoint edges.
inline std::array<std::vector<int>, 4> edge_colorings(const LatticeSpec& lat) {
  std::array<std::vector<int>, 4> out;
  for (std::size_t e = 0; e < lat.nn_edges.size(); ++e) {
    const Edge& ed = lat.nn_edges[e];
    const bool horizontal = lat.row_of(ed.a) == lat.row_of(ed.b);
    const int parity = horizontal ? lat.col_of(ed.a) % 2 : lat.row_of(ed.a) % 2;
    out[(horizontal ? 0 : 2) + parity].push_back(static_cast<int>(e));
  }
  return out;
}

/// Coupling per lattice edge; non-nearest-neighbour terms are rejected.
inline std::vector<double> edge_couplings(const LatticeSpec& lat, const Couplings& c) {
  std::map<std::pair<int, int>, int> index;
  for (std::size_t e = 0; e < lat.nn_edges.size(); ++e)
    index[{lat.nn_edges[e].a, lat.nn_edges[e].b}] = static_cast<int>(e);
  std::vector<double> J(lat.nn_edges.size(), 0.0);
  for (const auto& t : c.zz) {
    const auto it = index.find({std::min(t.a, t.b), std::max(t.a, t.b)});
    if (it == index.end()) throw Error(ErrorCategory::config, "PEPS engine supports nearest-neighbour couplings only");
    J[it->second] += t.J;
  }
  return J;
}

struct StepStats {
  double log_fidelity = 0.0;  // sum of log(1 - eps_gate)
  int gates = 0;

  void add(double eps) {
    log_fidelity += std::log1p(-std::min(eps, 1.0 - 1e-300));
    ++gates;
  }
  /// 1 - (prod (1 - eps_gate))^(1/m)
  double eps_bp() const { return gates == 0 ? 0.0 : std::max(0.0, -std::expm1(log_fidelity / gates)); }
};

/// Symmetric layer: fields for tau/2, ZZ colorings for tau, fields for tau/2.
inline void strang_layer(PEPSState& s, BPMessages& m, const std::vector<double>& J, const std::vector<double>& site_z,
                         Fields f, double tau, const BPOptions& bp, StepStats& stats) {
  const int n = s.num_sites();
  for (int i = 0; i < n; ++i) apply_one_site(s, i, field_gate(f.hx, f.hz + site_z[i], 0.5 * tau));
  for (const auto& color : edge_colorings(s.lat)) {
    if (color.empty()) continue;
    m = bp_fixed_point(s, bp, &m);
    for (int e : color) stats.add(apply_gate(s, m, e, zz_gate(J[e], tau)));
  }
  for (int i = 0; i < n; ++i) apply_one_site(s, i, field_gate(f.hx, f.hz + site_z[i], 0.5 * tau));
}

struct TrotterOptions {
  int order = 2;  // 2 (Strang) or 4 (Yoshida triple composition)
  BPOptions bp{};
};

/// One Trotter step from t to t + dt. Fields are taken at each layer's midpoint.
/// Returns eps_BP for the step.
inline double trotter_step(PEPSState& s, BPMessages& m, const Couplings& c, const Schedule& schedule, double t,
                           double dt, const TrotterOptions& opt = {}) {
  if (!(dt > 0.0) || dt > 0.02) throw Error(ErrorCategory::domain, "PEPS engine requires 0 < dt <= 0.02");
  const std::vector<double> J = edge_couplings(s.lat, c);
  StepStats stats;
  if (opt.order == 2) {
    strang_layer(s, m, J, c.site_z, schedule.eval(t + 0.5 * dt), dt, opt.bp, stats);
  } else if (opt.order == 4) {
    const double w1 = 1.0 / (2.0 - std::cbrt(2.0));
    const double w0 = 1.0 - 2.0 * w1;
    const double taus[3] = {w1 * dt, w0 * dt, w1 * dt};
    double t0 = t;
    for (double tau : taus) {
      strang_layer(s, m, J, c.site_z, schedule.eval(std::clamp(t0 + 0.5 * tau, t, t + dt)), tau, opt.bp, stats);
      t0 += tau;
    }
  } else {
    throw Error(ErrorCategory::config, "Trotter order must be 2 or 4");
  }
  return stats.eps_bp();
}

struct LocalMeasurement {
  std::vector<double> mag;
  std::vector<double> corr_nn;  // raw <sz sz> per lattice edge
};

inline double sz_expectation(const Tensor& rho) {
  const double p0 = rho({0, 0}).real(), p1 = rho({1, 1}).real();
  return (p1 - p0) / (p0 + p1);
}

/// <sz_a sz_b> on edge e from the two-site cluster with surrounding messages.
inline double bp_pair(const PEPSState& s, const BPMessages& m, int edge) {
  const Edge& ed = s.lat.nn_edges[edge];
  const Tensor xa = site_environment(s, m, ed.a, edge);  // p, p', k, b
  const Tensor xb = site_environment(s, m, ed.b, edge);
  const Tensor joint = contract(xa, {2, 3}, xb, {2, 3});  // pa, pa', pb, pb'
  double num = 0.0, den = 0.0;
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t q = 0; q < 2; ++q) {
      const double w = joint({p, p, q, q}).real();
      den += w;
      num += w * (p ? 1.0 : -1.0) * (q ? 1.0 : -1.0);
    }
  return num / den;
}

/// BP estimators: one-site values from the site tensor with its incoming
/// messages, nearest-neighbour values from the joined two-site cluster.
inline LocalMeasurement measure_bp(const PEPSState& s, const BPMessages& m) {
  LocalMeasurement out;
  for (int i = 0; i < s.num_sites(); ++i) out.mag.push_back(sz_expectation(site_environment(s, m, i, -1)));
  for (std::size_t e = 0; e < s.lat.nn_edges.size(); ++e) out.corr_nn.push_back(bp_pair(s, m, static_cast<int>(e)));
  return out;
}

/// <sz_b> for every b with site `a` projected onto sz = value, from a fresh
/// BP fixed point of the projected network. Empty if that outcome has no weight.
inline std::optional<std::vector<double>> conditioned_mag(const PEPSState& s, const BPMessages& m, int a, int value,
                                                          const BPOptions& opt) {
  PEPSState proj = s;
  const std::size_t keep = value > 0 ? 1 : 0;
  Tensor& t = proj.T[a];
  const std::size_t half = t.size() / 2;
  for (std::size_t k = 0; k < half; ++k) t.data()[(1 - keep) * half + k] = 0.0;
  if (t.norm() < 1e-14 * std::max(1.0, s.T[a].norm())) return std::nullopt;
  try {
    const BPMessages pm = bp_fixed_point(proj, opt, &m);
    std::vector<double> out;
    for (int i = 0; i < s.num_sites(); ++i) out.push_back(sz_expectation(site_environment(proj, pm, i, -1)));
    return out;
  } catch (const Error& e) {
    if (e.category() == ErrorCategory::bp_convergence) throw;
    return std::nullopt;
  }
}

/// Beyond nearest neighbours: <sz_a sz_b> = sum_s s p_a(s) <sz_b>_{a = s}.
inline std::vector<double> bp_line_from(const PEPSState& s, const BPMessages& m, int a, double mag_a,
                                        const BPOptions& opt) {
  std::vector<double> zz(s.num_sites(), 0.0);
  for (int value : {-1, 1}) {
    const double p = 0.5 * (1.0 + value * mag_a);
    if (p < 1e-14) continue;
    const auto cond = conditioned_mag(s, m, a, value, opt);
    if (!cond) continue;
    for (int b = 0; b < s.num_sites(); ++b) zz[b] += value * p * (*cond)[b];
  }
  zz[a] = 1.0;
  return zz;
}

/// Largest intermediate tensor (in elements) the exact contraction may build.
inline constexpr std::size_t kContractionBudget = std::size_t{1} << 24;

namespace detail {

struct Labeled {
  Tensor t;
  std::vector<int> labels;  // >= 0: edge index, < 0: -(site + 1) physical leg
};

inline Labeled join(const Labeled& a, const Labeled& b) {
  std::vector<int> ax_a, ax_b;
  std::vector<int> labels;
  std::size_t out = 1;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    bool shared = false;
    for (std::size_t j = 0; j < b.labels.size(); ++j)
      if (a.labels[i] == b.labels[j]) {
        ax_a.push_back(static_cast<int>(i));
        ax_b.push_back(static_cast<int>(j));
        shared = true;
      }
    if (!shared) {
      labels.push_back(a.labels[i]);
      out *= a.t.dim(i);
    }
  }
  for (std::size_t j = 0; j < b.labels.size(); ++j) {
    bool shared = false;
    for (int l : a.labels) shared = shared || l == b.labels[j];
    if (!shared) {
      labels.push_back(b.labels[j]);
      out *= b.t.dim(j);
    }
  }
  if (out > kContractionBudget) throw Error(ErrorCategory::resource, "exact PEPS contraction exceeds the cost guard");
  return {contract(a.t, ax_a, b.t, ax_b), labels};
}

inline Labeled site_labeled(const PEPSState& s, int i) {
  Labeled l{s.T[i], {-(i + 1)}};
  for (int e : s.inc[i]) l.labels.push_back(e);
  return l;
}

}  // namespace detail

/// Contracts the whole network into amplitudes (bit i of the index is site i).
/// The two halves of the row-major site order are each grown from their outer
/// edge inwards, so only the cut bonds stay open, and then joined.
inline Eigen::VectorXcd to_dense(const PEPSState& s) {
  const int n = s.num_sites();
  if (n > exact::kMaxSites) throw Error(ErrorCategory::resource, "exact PEPS contraction limited to 20 sites");
  auto block = [&](int first, int last, int step) {
    detail::Labeled acc = detail::site_labeled(s, first);
    for (int i = first + step; i != last + step; i += step) acc = detail::join(acc, detail::site_labeled(s, i));
    return acc;
  };
  detail::Labeled all = n == 1 ? block(0, 0, 1) : detail::join(block(0, n / 2 - 1, 1), block(n - 1, n / 2, -1));
  std::vector<int> perm;
  for (int site = n - 1; site >= 0; --site)
    for (std::size_t k = 0; k < all.labels.size(); ++k)
      if (all.labels[k] == -(site + 1)) perm.push_back(static_cast<int>(k));
  const Tensor ordered = all.t.permute(perm);
  return Eigen::Map<const Eigen::VectorXcd>(ordered.data().data(), static_cast<Eigen::Index>(ordered.size()));
}

/// Exact <prod_{i in sites} sz_i> of the (normalized) PEPS state.
inline double exact_contract_expectation(const PEPSState& s, const std::vector<int>& sites) {
  const Eigen::VectorXcd v = to_dense(s);
  double num = 0.0, den = 0.0;
  for (Eigen::Index b = 0; b < v.size(); ++b) {
    const double p = std::norm(v(b));
    double sign = 1.0;
    for (int i : sites) sign *= exact::spin(static_cast<std::uint64_t>(b), i);
    num += sign * p;
    den += p;
  }
  return num / den;
}

enum class MeasureMode { automatic, bp, exact };

struct RunOptions {
  IsingParams ising{};
  int chi2d = 8;
  TrotterOptions trotter{};
  MeasureMode measure = MeasureMode::automatic;
};

/// True when the dense contraction fits within the guard for this state.
inline bool exact_contraction_feasible(const PEPSState& s) {
  if (s.num_sites() > exact::kMaxSites) return false;
  try {
    to_dense(s);
  } catch (const Error& e) {
    if (e.category() == ErrorCategory::resource) return false;
    throw;
  }
  return true;
}

inline void record(ObservableSeries& series, const PEPSState& s, const BPMessages& m, double t, double err,
                   MeasureMode mode, const BPOptions& bp) {
  const LatticeSpec& lat = s.lat;
  bool use_exact = mode == MeasureMode::exact;
  std::optional<Eigen::VectorXcd> dense;
  if (mode != MeasureMode::bp) {
    try {
      dense = to_dense(s);
      use_exact = true;
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::resource || mode == MeasureMode::exact) throw;
    }
  }
  if (use_exact) {
    exact::DenseState st{s.num_sites(), *dense / dense->norm()};
    exact::record(series, lat, t, st, err);
    return;
  }
  const LocalMeasurement loc = measure_bp(s, m);
  const int r0 = lat.center_site;
  const std::vector<double> line = bp_line_from(s, m, r0, loc.mag[r0], bp);
  append_record(
      series, lat, t, loc.mag,
      [&](int a, int b) {
        const int e = s.edge_between(a, b);
        if (e >= 0) return loc.corr_nn[e];
        if (a == r0) return line[b];
        if (b == r0) return line[a];
        throw Error(ErrorCategory::domain, "BP estimator covers nearest neighbours and the reference row only");
      },
      err);
}

/// Trotterized evolution from the all-down product state. error_record holds
/// the eps_BP of the step ending at each record time. A BP failure ends the run
/// early with status "partial".
inline ObservableSeries run_protocol(const LatticeSpec& lat, const Schedule& schedule, double dt,
                                     const std::vector<double>& t_record, const RunOptions& opt,
                                     PEPSState* final_state = nullptr) {
  if (!(dt > 0.0) || dt > 0.02) throw Error(ErrorCategory::domain, "PEPS engine requires 0 < dt <= 0.02");
  const Couplings c = ising_couplings(lat, opt.ising);
  PEPSState s = init_polarized(lat, opt.chi2d);
  BPMessages m = init_messages(s);
  ObservableSeries series = make_series("peps-bp", lat, schedule.descriptor(), dt);
  const auto grid = step_grid(t_record, dt);
  std::size_t next = 0;
  double last_eps = 0.0;
  auto flush = [&](double t) {
    while (next < t_record.size() && t_record[next] == t) {
      if (opt.measure != MeasureMode::exact) m = bp_fixed_point(s, opt.trotter.bp, &m);
      record(series, s, m, t, last_eps, opt.measure, opt.trotter.bp);
      ++next;
    }
  };
  try {
    flush(0.0);
    for (std::size_t k = 1; k < grid.size(); ++k) {
      last_eps = trotter_step(s, m, c, schedule, grid[k - 1], grid[k] - grid[k - 1], opt.trotter);
      flush(grid[k]);
    }
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::bp_convergence) throw;
    series.meta.status = "partial";
    series.meta.note = e.what();
  }
  if (final_state) *final_state = std::move(s);
  return series;
}

}  // namespace tfim::peps
