#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tfim/error.hpp"
#include "tfim/lattice.hpp"
#include "tfim/model.hpp"
#include "tfim/observables.hpp"
#include "tfim/schedule.hpp"

namespace tfim::semiclassical {

using Vec3 = std::array<double, 3>;

/// Classical spin vectors (s^x, s^y, s^z), one per site.
struct SpinTrajectory {
  std::vector<Vec3> s;
};

struct TWEnsemble {
  std::vector<SpinTrajectory> trajectories;
  std::uint64_t seed = 0;
  bool exhaustive = false;  // every phase-space point exactly once
};

inline SpinTrajectory smf_initial(int n) {
  if (n < 1) throw Error(ErrorCategory::invalid_size, "need at least one site");
  return {std::vector<Vec3>(static_cast<std::size_t>(n), Vec3{0.0, 0.0, -1.0})};
}

/// Discrete Wigner samples of the all-down state: s^z = -1, s^x and s^y fair +-1.
inline TWEnsemble sample_initial(int n, int n_t, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCategory::invalid_size, "need at least one site");
  if (n_t < 1) throw Error(ErrorCategory::config, "n_t must be at least 1");
  TWEnsemble ens;
  ens.seed = seed;
  std::mt19937_64 rng(seed);
  auto coin = [&] { return (rng() >> 63) ? 1.0 : -1.0; };
  ens.trajectories.resize(static_cast<std::size_t>(n_t));
  for (auto& tr : ens.trajectories) {
    tr.s.resize(static_cast<std::size_t>(n));
    for (auto& v : tr.s) {
      v[0] = coin();
      v[1] = coin();
      v[2] = -1.0;
    }
  }
  return ens;
}

/// All 4^n phase-space points of the all-down state, each with equal weight.
inline TWEnsemble enumerate_initial(int n) {
  if (n < 1 || n > 7) throw Error(ErrorCategory::invalid_size, "exhaustive enumeration limited to 7 sites");
  TWEnsemble ens;
  ens.exhaustive = true;
  const std::uint64_t count = std::uint64_t{1} << (2 * n);
  for (std::uint64_t code = 0; code < count; ++code) {
    SpinTrajectory tr;
    for (int i = 0; i < n; ++i) {
      const auto bits = (code >> (2 * i)) & 3u;
      tr.s.push_back({(bits & 1u) ? 1.0 : -1.0, (bits & 2u) ? 1.0 : -1.0, -1.0});
    }
    ens.trajectories.push_back(std::move(tr));
  }
  return ens;
}

/// ds_i/dt = 2 B_i x s_i with B_i = (hx, 0, hz + site_z_i + sum_j J_ij s^z_j).
inline void classical_rhs(const std::vector<Vec3>& s, const Couplings& c, Fields f, std::vector<Vec3>& out) {
  const std::size_t n = s.size();
  std::vector<double> bz(n, f.hz);
  for (std::size_t i = 0; i < n; ++i) bz[i] += c.site_z[i];
  for (const auto& t : c.zz) {
    bz[t.a] += t.J * s[t.b][2];
    bz[t.b] += t.J * s[t.a][2];
  }
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double bx = f.hx;
    const Vec3& v = s[i];
    out[i] = {2.0 * (-bz[i] * v[1]), 2.0 * (bz[i] * v[0] - bx * v[2]), 2.0 * (bx * v[1])};
  }
}

/// H_C = sum J_ij s^z_i s^z_j + hx sum s^x + sum (hz + site_z) s^z.
inline double classical_energy(const std::vector<Vec3>& s, const Couplings& c, Fields f) {
  double e = 0.0;
  for (const auto& t : c.zz) e += t.J * s[t.a][2] * s[t.b][2];
  for (std::size_t i = 0; i < s.size(); ++i) e += f.hx * s[i][0] + (f.hz + c.site_z[i]) * s[i][2];
  return e;
}

/// Classical RK4 step from t0 to t0 + h with fields sampled from the schedule.
inline void rk4_step(std::vector<Vec3>& s, const Couplings& c, const Schedule& sched, double t0, double h) {
  const std::size_t n = s.size();
  std::vector<Vec3> k1, k2, k3, k4, tmp(n);
  auto axpy = [&](const std::vector<Vec3>& k, double w) {
    for (std::size_t i = 0; i < n; ++i)
      for (int a = 0; a < 3; ++a) tmp[i][a] = s[i][a] + w * k[i][a];
  };
  const Fields f0 = sched.eval(t0), fm = sched.eval(t0 + 0.5 * h), f1 = sched.eval(t0 + h);
  classical_rhs(s, c, f0, k1);
  axpy(k1, 0.5 * h);
  classical_rhs(tmp, c, fm, k2);
  axpy(k2, 0.5 * h);
  classical_rhs(tmp, c, fm, k3);
  axpy(k3, h);
  classical_rhs(tmp, c, f1, k4);
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) s[i][a] += h / 6.0 * (k1[i][a] + 2.0 * k2[i][a] + 2.0 * k3[i][a] + k4[i][a]);
}

enum class Method { smf, tw };

struct RunOptions {
  IsingParams ising{};
  int n_t = 1000;
  std::uint64_t seed = 0;
};

namespace detail {

struct Stats {
  std::vector<double> mean, stderr_;
};

inline Stats reduce(const std::vector<double>& values, std::size_t n_obs, std::size_t n_traj, bool exact) {
  Stats st;
  st.mean.assign(n_obs, 0.0);
  st.stderr_.assign(n_obs, 0.0);
  for (std::size_t k = 0; k < n_traj; ++k)
    for (std::size_t o = 0; o < n_obs; ++o) st.mean[o] += values[k * n_obs + o];
  for (double& m : st.mean) m /= static_cast<double>(n_traj);
  if (exact || n_traj < 2) return st;
  for (std::size_t k = 0; k < n_traj; ++k)
    for (std::size_t o = 0; o < n_obs; ++o) {
      const double d = values[k * n_obs + o] - st.mean[o];
      st.stderr_[o] += d * d;
    }
  for (double& v : st.stderr_) v = std::sqrt(v / static_cast<double>(n_traj - 1) / static_cast<double>(n_traj));
  return st;
}

}  // namespace detail

/// Integrates an explicit set of trajectories. Ensemble means give <sz_i> and
/// raw <sz_a sz_b> (a != b); error_record is the largest standard error among
/// the recorded observables (zero for SMF and exhaustive ensembles).
inline ObservableSeries run_trajectories(const LatticeSpec& lat, const Couplings& c, const Schedule& schedule, double dt,
                                         const std::vector<double>& t_record, std::vector<SpinTrajectory> trajs,
                                         const std::string& engine, bool exact_average, std::uint64_t seed) {
  if (!(dt > 0.0) || dt > 0.01) throw Error(ErrorCategory::domain, "semiclassical engines require 0 < dt <= 0.01");
  const int n = lat.num_sites();
  ObservableSeries series = make_series(engine, lat, schedule.descriptor(), dt, seed);
  const bool ensemble = engine == "tw";
  // pairs that feed the recorded correlations
  std::vector<std::pair<int, int>> pairs;
  for (int p : lat.line_partners()) pairs.emplace_back(lat.center_site, p);
  for (const auto& e : lat.nn_edges) pairs.emplace_back(e.a, e.b);
  const std::size_t n_obs = static_cast<std::size_t>(n) + pairs.size();
  std::vector<double> values(trajs.size() * n_obs);
  auto flush_one = [&](double t) {
    for (std::size_t k = 0; k < trajs.size(); ++k) {
      const auto& s = trajs[k].s;
      double* row = values.data() + k * n_obs;
      for (int i = 0; i < n; ++i) row[i] = s[i][2];
      for (std::size_t p = 0; p < pairs.size(); ++p) row[n + p] = s[pairs[p].first][2] * s[pairs[p].second][2];
    }
    const detail::Stats st = detail::reduce(values, n_obs, trajs.size(), exact_average);
    const std::vector<double> mag(st.mean.begin(), st.mean.begin() + n);
    std::vector<std::vector<double>> zz(n, std::vector<double>(n, 0.0));
    for (std::size_t p = 0; p < pairs.size(); ++p)
      zz[pairs[p].first][pairs[p].second] = zz[pairs[p].second][pairs[p].first] = st.mean[n + p];
    const double err = *std::max_element(st.stderr_.begin(), st.stderr_.end());
    append_record(series, lat, t, mag, [&](int a, int b) { return zz[a][b]; }, err);
    if (ensemble) series.mag_stderr.emplace_back(st.stderr_.begin(), st.stderr_.begin() + n);
  };
  const auto grid = step_grid(t_record, dt);
  std::size_t next = 0;
  auto flush = [&](double t) {
    while (next < t_record.size() && t_record[next] == t) {
      flush_one(t);
      ++next;
    }
  };
  flush(0.0);
  for (std::size_t g = 1; g < grid.size(); ++g) {
    for (auto& tr : trajs) rk4_step(tr.s, c, schedule, grid[g - 1], grid[g] - grid[g - 1]);
    flush(grid[g]);
  }
  return series;
}

/// SMF runs the single mean-field trajectory; TW averages n_t sampled
/// trajectories, or enumerates all 4^N phase-space points when that is no
/// more than n_t and N <= 7.
inline ObservableSeries run_protocol(Method method, const LatticeSpec& lat, const Schedule& schedule, double dt,
                                     const std::vector<double>& t_record, const RunOptions& opt) {
  const Couplings c = ising_couplings(lat, opt.ising);
  const int n = lat.num_sites();
  if (method == Method::smf)
    return run_trajectories(lat, c, schedule, dt, t_record, {smf_initial(n)}, "smf", true, 0);
  if (opt.n_t < 1) throw Error(ErrorCategory::config, "n_t must be at least 1");
  const bool enumerate = n <= 7 && (std::uint64_t{1} << (2 * n)) <= static_cast<std::uint64_t>(opt.n_t);
  TWEnsemble ens = enumerate ? enumerate_initial(n) : sample_initial(n, opt.n_t, opt.seed);
  return run_trajectories(lat, c, schedule, dt, t_record, std::move(ens.trajectories), "tw", enumerate, opt.seed);
}

}  // namespace tfim::semiclassical
