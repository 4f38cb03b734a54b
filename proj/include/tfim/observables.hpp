#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tfim/error.hpp"
#include "tfim/lattice.hpp"

namespace tfim {

struct SeriesMetadata {
  std::string engine;
  int rows = 0;
  int cols = 0;
  std::string schedule;
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::string status = "complete";  // "complete" or "partial"
  std::string note;
};

/// Timestamped observables shared by every engine.
///   mag[t][i]         <sz_i> on the full grid
///   corr_line[t][k]   C(delta = k + 1) from the reference site along its row
///   corr_nn[t]        C(delta = 1)
///   corr_pairs[t][e]  connected correlation on nearest-neighbour edge e (lattice order)
///   error_record[t]   engine-specific error scalar
///   mag_stderr[t][i]  sampling standard errors (ensemble engines only, else empty)
struct ObservableSeries {
  SeriesMetadata meta;
  std::vector<double> times;
  std::vector<std::vector<double>> mag;
  std::vector<std::vector<double>> corr_line;
  std::vector<double> corr_nn;
  std::vector<std::vector<double>> corr_pairs;
  std::vector<double> error_record;
  std::vector<std::vector<double>> mag_stderr;

  std::size_t size() const { return times.size(); }
  bool has_stderr() const { return !mag_stderr.empty(); }
};

inline double connected_correlation(double raw_zz, double mz_a, double mz_b) { return raw_zz - mz_a * mz_b; }

/// Appends one record. raw_zz(a, b) must return <sz_a sz_b> for a != b.
template <class RawZZ>
void append_record(ObservableSeries& s, const LatticeSpec& lat, double t, const std::vector<double>& mag,
                   RawZZ&& raw_zz, double error) {
  const int r0 = lat.center_site;
  std::vector<double> line;
  for (int p : lat.line_partners()) line.push_back(connected_correlation(raw_zz(r0, p), mag[r0], mag[p]));
  std::vector<double> pairs;
  pairs.reserve(lat.nn_edges.size());
  for (const auto& e : lat.nn_edges) pairs.push_back(connected_correlation(raw_zz(e.a, e.b), mag[e.a], mag[e.b]));
  s.times.push_back(t);
  s.mag.push_back(mag);
  s.corr_nn.push_back(line.empty() ? 0.0 : line.front());
  s.corr_line.push_back(std::move(line));
  s.corr_pairs.push_back(std::move(pairs));
  s.error_record.push_back(error);
}

inline ObservableSeries make_series(const std::string& engine, const LatticeSpec& lat, const std::string& schedule,
                                    double dt, std::uint64_t seed = 0) {
  ObservableSeries s;
  s.meta.engine = engine;
  s.meta.rows = lat.rows;
  s.meta.cols = lat.cols;
  s.meta.schedule = schedule;
  s.meta.dt = dt;
  s.meta.seed = seed;
  return s;
}

/// Index of the record at time t, matched within half a time step.
inline std::size_t find_time(const ObservableSeries& s, double t) {
  const double tol = s.meta.dt > 0.0 ? 0.5 * s.meta.dt : 1e-9;
  std::size_t best = s.times.size();
  double best_gap = tol;
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    const double gap = std::abs(s.times[k] - t);
    if (gap <= best_gap) {
      best = k;
      best_gap = gap;
    }
  }
  if (best == s.times.size()) throw Error(ErrorCategory::comparison, "no record near t = " + std::to_string(t));
  return best;
}

inline void require_same_lattice(const ObservableSeries& a, const ObservableSeries& b) {
  if (a.meta.rows != b.meta.rows || a.meta.cols != b.meta.cols)
    throw Error(ErrorCategory::comparison, "series describe different lattices");
}

/// eps_z = (2 / L) sum_i |<sz_i>_A1 - <sz_i>_A2| over the center-most row.
inline double epsilon_z(const ObservableSeries& a1, const ObservableSeries& a2, double t) {
  require_same_lattice(a1, a2);
  const std::size_t k1 = find_time(a1, t);
  const std::size_t k2 = find_time(a2, t);
  const LatticeSpec lat = build_grid(a1.meta.rows, a1.meta.cols);
  double sum = 0.0;
  for (int i : lat.center_row()) sum += std::abs(a1.mag[k1][i] - a2.mag[k2][i]);
  return 2.0 * sum / lat.cols;
}

/// Relative L1 discrepancy of the center-row correlations, normalised by A1.
inline double epsilon_zz(const ObservableSeries& a1, const ObservableSeries& a2, double t) {
  require_same_lattice(a1, a2);
  const std::size_t k1 = find_time(a1, t);
  const std::size_t k2 = find_time(a2, t);
  const auto& c1 = a1.corr_line[k1];
  const auto& c2 = a2.corr_line[k2];
  if (c1.size() != c2.size()) throw Error(ErrorCategory::comparison, "correlation rows differ in length");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < c1.size(); ++i) {
    num += std::abs(c1[i] - c2[i]);
    den += c1[i];
  }
  if (std::abs(den) < 1e-14)
    throw Error(ErrorCategory::undefined_reference, "reference correlations sum to zero at t = " + std::to_string(t));
  return num / den;
}

}  // namespace tfim
