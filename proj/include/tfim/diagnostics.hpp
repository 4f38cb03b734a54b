#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tfim/error.hpp"
#include "tfim/lattice.hpp"
#include "tfim/observables.hpp"

namespace tfim::diag {

/// The eight symmetries of an L x L grid as site permutations, in the order
/// identity, rot90, rot180, rot270, flip rows, flip columns, transpose,
/// anti-transpose. maps[k][i] is the image of site i.
using D4Action = std::array<std::vector<int>, 8>;

inline D4Action d4_maps(int L) {
  if (L < 1) throw Error(ErrorCategory::invalid_size, "L must be positive");
  D4Action maps;
  const int m = L - 1;
  for (int r = 0; r < L; ++r) {
    for (int c = 0; c < L; ++c) {
      const std::array<std::pair<int, int>, 8> img = {{{r, c},
                                                       {c, m - r},
                                                       {m - r, m - c},
                                                       {m - c, r},
                                                       {m - r, c},
                                                       {r, m - c},
                                                       {c, r},
                                                       {m - c, m - r}}};
      for (int k = 0; k < 8; ++k) maps[k].push_back(img[k].first * L + img[k].second);
    }
  }
  return maps;
}

enum class ObservableClass { magnetization, correlation };

inline double default_xi(ObservableClass c) { return c == ObservableClass::magnetization ? 0.01 : 0.005; }

struct SymmetryReport {
  ObservableClass observable = ObservableClass::magnetization;
  std::vector<double> eps;      // per site or per reference pair
  std::vector<double> eps_rel;
  double eps_max = 0.0;
  double eps_rel_max = 0.0;
  double threshold = 0.4;
  bool converged = true;
};

namespace detail {

inline void finish(SymmetryReport& r) {
  r.eps_max = r.eps.empty() ? 0.0 : *std::max_element(r.eps.begin(), r.eps.end());
  r.eps_rel_max = r.eps_rel.empty() ? 0.0 : *std::max_element(r.eps_rel.begin(), r.eps_rel.end());
  r.converged = r.eps_rel_max < r.threshold;
}

// eps and eps_rel of one orbit: `self` and its 7 non-trivial images.
inline std::pair<double, double> orbit_error(double self, const std::array<double, 7>& images, double xi) {
  double eps = 0.0;
  double mean = std::abs(self);
  for (double v : images) {
    eps = std::max(eps, std::abs(self - v));
    mean += std::abs(v);
  }
  mean /= 8.0;
  return {eps, eps / (mean > xi ? mean : xi)};
}

inline int grid_side(std::size_t n) {
  const auto L = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (static_cast<std::size_t>(L) * static_cast<std::size_t>(L) != n)
    throw Error(ErrorCategory::invalid_size, "symmetry analysis needs a square lattice");
  return L;
}

}  // namespace detail

/// Per-site D4 asymmetry of a scalar field on the L x L grid.
inline SymmetryReport symmetry_error(const std::vector<double>& values, int L, double xi, double threshold = 0.4) {
  if (static_cast<int>(values.size()) != L * L)
    throw Error(ErrorCategory::invalid_size, "expected L*L site values");
  const D4Action maps = d4_maps(L);
  SymmetryReport r;
  r.threshold = threshold;
  for (int i = 0; i < L * L; ++i) {
    std::array<double, 7> img{};
    for (int k = 1; k < 8; ++k) img[k - 1] = values[maps[k][i]];
    const auto [e, rel] = detail::orbit_error(values[i], img, xi);
    r.eps.push_back(e);
    r.eps_rel.push_back(rel);
  }
  detail::finish(r);
  return r;
}

using PairValues = std::map<std::pair<int, int>, double>;

/// D4 asymmetry of a pair observable; the group acts on both endpoints. Pairs
/// are looked up unordered. One entry per reference pair, in map order.
inline SymmetryReport symmetry_error_corr(const PairValues& values, int L, double xi, double threshold = 0.4) {
  const D4Action maps = d4_maps(L);
  auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  PairValues canon;
  for (const auto& [p, v] : values) canon[key(p.first, p.second)] = v;
  SymmetryReport r;
  r.observable = ObservableClass::correlation;
  r.threshold = threshold;
  for (const auto& [p, v] : canon) {
    std::array<double, 7> img{};
    for (int k = 1; k < 8; ++k) {
      const auto it = canon.find(key(maps[k][p.first], maps[k][p.second]));
      if (it == canon.end())
        throw Error(ErrorCategory::incomplete_data, "missing D4 image of pair (" + std::to_string(p.first) + ", " +
                                                        std::to_string(p.second) + ")");
      img[k - 1] = it->second;
    }
    const auto [e, rel] = detail::orbit_error(v, img, xi);
    r.eps.push_back(e);
    r.eps_rel.push_back(rel);
  }
  detail::finish(r);
  return r;
}

/// Report for record k of a series.
inline SymmetryReport symmetry_at(const ObservableSeries& s, std::size_t k, ObservableClass cls, double xi,
                                  double threshold = 0.4) {
  if (s.meta.rows != s.meta.cols) throw Error(ErrorCategory::invalid_size, "symmetry analysis needs a square lattice");
  const int L = s.meta.rows;
  if (cls == ObservableClass::magnetization) {
    if (k >= s.mag.size() || static_cast<int>(s.mag[k].size()) != L * L)
      throw Error(ErrorCategory::incomplete_data, "series lacks full-grid magnetization");
    return symmetry_error(s.mag[k], L, xi, threshold);
  }
  const LatticeSpec lat = build_lattice(L);
  if (k >= s.corr_pairs.size() || s.corr_pairs[k].size() != lat.nn_edges.size())
    throw Error(ErrorCategory::incomplete_data, "series lacks nearest-neighbour pair correlations");
  PairValues pv;
  for (std::size_t e = 0; e < lat.nn_edges.size(); ++e) pv[{lat.nn_edges[e].a, lat.nn_edges[e].b}] = s.corr_pairs[k][e];
  return symmetry_error_corr(pv, L, xi, threshold);
}

/// Largest record time T with eps_rel < threshold at every record up to T;
/// 0 if the first record already violates it.
inline double converged_until(const ObservableSeries& s, ObservableClass cls, double xi, double threshold = 0.4) {
  double last = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!symmetry_at(s, k, cls, xi, threshold).converged) return last;
    last = s.times[k];
  }
  return last;
}

struct KZCurve {
  double tau = 0.0;
  std::vector<double> delta;
  std::vector<double> C;
};

struct KZExponents {
  double nu = 0.629971;
  double z = 1.0;
  double eta = 0.036298;
};

struct KZCurveSet {
  KZExponents exponents;
  double tau_ref = 0.0;
  std::vector<KZCurve> raw;
  std::vector<std::vector<double>> x;  // delta / xi_hat
  std::vector<std::vector<double>> y;  // C * xi_hat^(1 + eta)
};

inline double kz_length(double tau, double tau_ref, const KZExponents& e) {
  return std::pow(tau / tau_ref, e.nu / (1.0 + e.z * e.nu));
}

/// tau_ref <= 0 selects the first curve's tau.
inline KZCurveSet kz_rescale(const std::vector<KZCurve>& curves, const KZExponents& e, double tau_ref = 0.0) {
  if (curves.size() < 2) throw Error(ErrorCategory::incomparable_curves, "need at least two ramp times");
  for (std::size_t i = 0; i < curves.size(); ++i) {
    if (!(curves[i].tau > 0.0)) throw Error(ErrorCategory::domain, "ramp times must be positive");
    if (curves[i].delta.size() != curves[i].C.size())
      throw Error(ErrorCategory::domain, "distance and correlation arrays differ in length");
    for (std::size_t j = 0; j < i; ++j)
      if (curves[j].tau == curves[i].tau) throw Error(ErrorCategory::domain, "ramp times must be distinct");
  }
  KZCurveSet out;
  out.exponents = e;
  out.tau_ref = tau_ref > 0.0 ? tau_ref : curves.front().tau;
  out.raw = curves;
  for (const auto& c : curves) {
    const double xi = kz_length(c.tau, out.tau_ref, e);
    const double amp = std::pow(xi, 1.0 + e.eta);
    std::vector<double> x, y;
    for (std::size_t k = 0; k < c.delta.size(); ++k) {
      x.push_back(c.delta[k] / xi);
      y.push_back(c.C[k] * amp);
    }
    out.x.push_back(std::move(x));
    out.y.push_back(std::move(y));
  }
  return out;
}

/// Inverse of kz_rescale: recovers the (delta, C) curves from the rescaled points.
inline std::vector<KZCurve> kz_unrescale(const KZCurveSet& set) {
  std::vector<KZCurve> out;
  for (std::size_t i = 0; i < set.raw.size(); ++i) {
    const double xi = kz_length(set.raw[i].tau, set.tau_ref, set.exponents);
    const double amp = std::pow(xi, 1.0 + set.exponents.eta);
    KZCurve c;
    c.tau = set.raw[i].tau;
    for (std::size_t k = 0; k < set.x[i].size(); ++k) {
      c.delta.push_back(set.x[i][k] * xi);
      c.C.push_back(set.y[i][k] / amp);
    }
    out.push_back(std::move(c));
  }
  return out;
}

namespace detail {

inline double interpolate(const std::vector<std::pair<double, double>>& pts, double x) {
  auto it = std::lower_bound(pts.begin(), pts.end(), x, [](const auto& p, double v) { return p.first < v; });
  if (it == pts.begin()) return it->second;
  if (it == pts.end()) return pts.back().second;
  const auto& b = *it;
  const auto& a = *(it - 1);
  if (b.first == a.first) return b.second;
  return a.second + (x - a.first) / (b.first - a.first) * (b.second - a.second);
}

}  // namespace detail

/// Mean squared deviation of each curve from the pointwise mean curve, on a
/// uniform grid of `grid_points` covering the common support of all curves.
inline double collapse_quality(const KZCurveSet& set, int grid_points = 256) {
  if (set.x.size() < 2) throw Error(ErrorCategory::incomparable_curves, "need at least two curves");
  std::vector<std::vector<std::pair<double, double>>> curves;
  double lo = -HUGE_VAL, hi = HUGE_VAL;
  for (std::size_t i = 0; i < set.x.size(); ++i) {
    if (set.x[i].size() < 2) throw Error(ErrorCategory::incomparable_curves, "curve with fewer than two points");
    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = 0; k < set.x[i].size(); ++k) pts.emplace_back(set.x[i][k], set.y[i][k]);
    std::sort(pts.begin(), pts.end());
    lo = std::max(lo, pts.front().first);
    hi = std::min(hi, pts.back().first);
    curves.push_back(std::move(pts));
  }
  if (!(hi > lo)) throw Error(ErrorCategory::incomparable_curves, "rescaled curves do not overlap");
  double total = 0.0;
  std::vector<double> vals(curves.size());
  for (int g = 0; g < grid_points; ++g) {
    const double x = lo + (hi - lo) * g / (grid_points - 1);
    double mean = 0.0;
    for (std::size_t i = 0; i < curves.size(); ++i) mean += vals[i] = detail::interpolate(curves[i], x);
    mean /= static_cast<double>(curves.size());
    for (double v : vals) total += (v - mean) * (v - mean);
  }
  return total / (static_cast<double>(grid_points) * static_cast<double>(curves.size()));
}

/// Correlation curve C(delta), delta = 1, 2, ..., taken from the record nearest t.
inline KZCurve curve_from_series(const ObservableSeries& s, double tau, double t) {
  const std::size_t k = find_time(s, t);
  KZCurve c;
  c.tau = tau;
  for (std::size_t d = 0; d < s.corr_line[k].size(); ++d) {
    c.delta.push_back(static_cast<double>(d + 1));
    c.C.push_back(s.corr_line[k][d]);
  }
  return c;
}

}  // namespace tfim::diag
