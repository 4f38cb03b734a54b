#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "tfim/error.hpp"
#include "tfim/krylov.hpp"
#include "tfim/lattice.hpp"
#include "tfim/model.hpp"
#include "tfim/observables.hpp"
#include "tfim/schedule.hpp"

namespace tfim::exact {

inline constexpr int kMaxSites = 20;

/// Bit i of the basis index is site i: 0 = down (sz = -1), 1 = up (sz = +1).
struct DenseState {
  int num_sites = 0;
  Eigen::VectorXcd amplitudes;
};

inline double spin(std::uint64_t b, int i) { return ((b >> i) & 1u) ? 1.0 : -1.0; }

inline DenseState init_polarized(int n) {
  if (n < 1) throw Error(ErrorCategory::invalid_size, "need at least one site");
  if (n > kMaxSites) throw Error(ErrorCategory::memory_guard, "dense state limited to 20 sites");
  DenseState s;
  s.num_sites = n;
  s.amplitudes = Eigen::VectorXcd::Zero(Eigen::Index{1} << n);
  s.amplitudes(0) = 1.0;
  return s;
}

/// Matrix-free H(hx, hz) with sz diagonal and sx as bit flips.
class Hamiltonian {
 public:
  explicit Hamiltonian(const Couplings& c) : n_(c.num_sites) {
    if (n_ > kMaxSites) throw Error(ErrorCategory::memory_guard, "dense state limited to 20 sites");
    const std::uint64_t dim = std::uint64_t{1} << n_;
    zz_.assign(dim, 0.0);
    site_.assign(dim, 0.0);
    magnetization_.assign(dim, 0.0);
    for (std::uint64_t b = 0; b < dim; ++b) {
      double e = 0.0;
      for (const auto& t : c.zz) e += t.J * spin(b, t.a) * spin(b, t.b);
      zz_[b] = e;
      double m = 0.0;
      double s = 0.0;
      for (int i = 0; i < n_; ++i) {
        m += spin(b, i);
        s += c.site_z[i] * spin(b, i);
      }
      magnetization_[b] = m;
      site_[b] = s;
    }
  }

  int num_sites() const { return n_; }

  void set_fields(Fields f) { fields_ = f; }
  Fields fields() const { return fields_; }

  double diagonal(std::uint64_t b) const { return zz_[b] + fields_.hz * magnetization_[b] + site_[b]; }

  void apply(const Eigen::VectorXcd& in, Eigen::VectorXcd& out) const {
    const auto dim = static_cast<std::uint64_t>(in.size());
    out.resize(in.size());
    const double hx = fields_.hx;
    for (std::uint64_t b = 0; b < dim; ++b) {
      cd acc = diagonal(b) * in(static_cast<Eigen::Index>(b));
      if (hx != 0.0) {
        cd flip = 0.0;
        for (int i = 0; i < n_; ++i) flip += in(static_cast<Eigen::Index>(b ^ (std::uint64_t{1} << i)));
        acc += hx * flip;
      }
      out(static_cast<Eigen::Index>(b)) = acc;
    }
  }

  double energy(const DenseState& s) const {
    Eigen::VectorXcd hv;
    apply(s.amplitudes, hv);
    return s.amplitudes.dot(hv).real();
  }

  /// Dense matrix for small systems (tests and MPO checks).
  Eigen::MatrixXcd dense() const {
    const Eigen::Index dim = Eigen::Index{1} << n_;
    Eigen::MatrixXcd m(dim, dim);
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(dim);
    Eigen::VectorXcd col;
    for (Eigen::Index k = 0; k < dim; ++k) {
      e.setZero();
      e(k) = 1.0;
      apply(e, col);
      m.col(k) = col;
    }
    return m;
  }

 private:
  int n_;
  Fields fields_{0.0, 0.0};
  std::vector<double> zz_;
  std::vector<double> site_;
  std::vector<double> magnetization_;
};

struct Measurement {
  std::vector<double> mag;
  Eigen::MatrixXd zz;  // raw <sz_a sz_b>
};

inline Measurement measure(const DenseState& s) {
  const int n = s.num_sites;
  Measurement m;
  m.mag.assign(n, 0.0);
  m.zz = Eigen::MatrixXd::Zero(n, n);
  const auto dim = static_cast<std::uint64_t>(s.amplitudes.size());
  std::vector<double> sz(n);
  for (std::uint64_t b = 0; b < dim; ++b) {
    const double p = std::norm(s.amplitudes(static_cast<Eigen::Index>(b)));
    if (p == 0.0) continue;
    for (int i = 0; i < n; ++i) sz[i] = spin(b, i);
    for (int i = 0; i < n; ++i) {
      m.mag[i] += p * sz[i];
      for (int j = i + 1; j < n; ++j) m.zz(i, j) += p * sz[i] * sz[j];
    }
  }
  for (int i = 0; i < n; ++i) {
    m.zz(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) m.zz(j, i) = m.zz(i, j);
  }
  return m;
}

inline void record(ObservableSeries& series, const LatticeSpec& lat, double t, const DenseState& s, double err) {
  const Measurement m = measure(s);
  append_record(series, lat, t, m.mag, [&](int a, int b) { return m.zz(a, b); }, err);
}

/// Propagates a dense state through a schedule. Each step applies
/// exp(-i H(t_mid) dt) via Lanczos.
class Evolver {
 public:
  Evolver(Couplings couplings, Schedule schedule, double krylov_tol = 1e-12, int max_krylov = 40)
      : h_(couplings), schedule_(std::move(schedule)), tol_(krylov_tol), max_dim_(max_krylov) {}

  const Hamiltonian& hamiltonian() const { return h_; }
  Hamiltonian& hamiltonian() { return h_; }
  double accumulated_error() const { return accumulated_; }

  void step(DenseState& s, double t0, double t1) {
    h_.set_fields(schedule_.eval(0.5 * (t0 + t1)));
    const KrylovStats st =
        krylov_expm([this](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) { h_.apply(in, out); }, s.amplitudes,
                    t1 - t0, tol_, max_dim_);
    accumulated_ += st.error_estimate;
  }

 private:
  Hamiltonian h_;
  Schedule schedule_;
  double tol_;
  int max_dim_;
  double accumulated_ = 0.0;
};

inline void check_dt(double dt) {
  if (!(dt > 0.0) || dt > 0.05) throw Error(ErrorCategory::domain, "exact engine requires 0 < dt <= 0.05");
}

/// Evolves the polarized state and records observables at t_record.
/// error_record carries the accumulated Krylov error bound.
inline ObservableSeries evolve(const LatticeSpec& lat, const Couplings& couplings, const Schedule& schedule,
                               double dt, const std::vector<double>& t_record, DenseState* final_state = nullptr) {
  check_dt(dt);
  if (!t_record.empty() && t_record.back() > schedule.t_final() * (1 + 1e-12))
    throw Error(ErrorCategory::domain, "record times exceed the schedule horizon");
  DenseState psi = init_polarized(lat.num_sites());
  Evolver ev(couplings, schedule);
  ObservableSeries series = make_series("exact", lat, schedule.descriptor(), dt);
  const std::vector<double> grid = step_grid(t_record, dt);
  std::size_t next = 0;
  auto flush = [&](double t) {
    while (next < t_record.size() && t_record[next] == t) {
      record(series, lat, t, psi, ev.accumulated_error());
      ++next;
    }
  };
  flush(0.0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    ev.step(psi, grid[k - 1], grid[k]);
    flush(grid[k]);
  }
  if (final_state) *final_state = std::move(psi);
  return series;
}

inline ObservableSeries evolve(const LatticeSpec& lat, const IsingParams& p, const Schedule& schedule, double dt,
                               const std::vector<double>& t_record, DenseState* final_state = nullptr) {
  return evolve(lat, ising_couplings(lat, p), schedule, dt, t_record, final_state);
}

inline ObservableSeries evolve(const LatticeSpec& lat, const RydbergParams& p, const Schedule& schedule, double dt,
                               const std::vector<double>& t_record, DenseState* final_state = nullptr) {
  return evolve(lat, rydberg_couplings(p), schedule, dt, t_record, final_state);
}

}  // namespace tfim::exact
