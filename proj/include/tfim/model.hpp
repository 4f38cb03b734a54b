#pragma once

#include <cmath>
#include <vector>

#include "tfim/error.hpp"
#include "tfim/lattice.hpp"

namespace tfim {

/// Nearest-neighbour coupling. sign = +1 is the antiferromagnet,
/// sign = -1 flips the coupling (ferromagnetic picture).
struct IsingParams {
  double J = 1.0;
  int sign = 1;

  void validate() const {
    if (!(J > 0.0)) throw Error(ErrorCategory::config, "J must be positive");
    if (sign != 1 && sign != -1) throw Error(ErrorCategory::config, "sign must be +1 or -1");
  }
};

struct RydbergParams {
  double C6 = 1.0;
  double spacing = 1.0;
  std::vector<std::vector<double>> J;  // all-pairs couplings, zero diagonal
  std::vector<double> delta_z;         // site-dependent longitudinal offsets, summing to zero

  double nn_coupling() const { return C6 / (4.0 * std::pow(spacing, 6)); }
};

inline RydbergParams build_rydberg(const LatticeSpec& lat, double C6, double spacing) {
  if (!(C6 > 0.0) || !(spacing > 0.0)) throw Error(ErrorCategory::config, "C6 and spacing must be positive");
  const int n = lat.num_sites();
  RydbergParams p;
  p.C6 = C6;
  p.spacing = spacing;
  p.J.assign(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dr = lat.row_of(i) - lat.row_of(j);
      const double dc = lat.col_of(i) - lat.col_of(j);
      const double r2 = (dr * dr + dc * dc) * spacing * spacing;
      p.J[i][j] = C6 / (4.0 * r2 * r2 * r2);
    }
  }
  std::vector<double> coord(n, 0.0);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) coord[i] += p.J[i][j];
    total += coord[i];
  }
  p.delta_z.resize(n);
  for (int i = 0; i < n; ++i) p.delta_z[i] = coord[i] - total / n;
  return p;
}

struct ZZTerm {
  int a;
  int b;
  double J;
};

/// Field-independent part of the Hamiltonian
///   H = sum_terms J_ab sz_a sz_b + hx sum sx + hz sum sz + sum_i site_z[i] sz_i.
struct Couplings {
  int num_sites = 0;
  std::vector<ZZTerm> zz;
  std::vector<double> site_z;
};

inline Couplings ising_couplings(const LatticeSpec& lat, const IsingParams& p) {
  p.validate();
  Couplings c;
  c.num_sites = lat.num_sites();
  for (const auto& e : lat.nn_edges) c.zz.push_back({e.a, e.b, p.sign * p.J});
  c.site_z.assign(c.num_sites, 0.0);
  return c;
}

inline Couplings rydberg_couplings(const RydbergParams& p) {
  Couplings c;
  c.num_sites = static_cast<int>(p.J.size());
  for (int i = 0; i < c.num_sites; ++i)
    for (int j = i + 1; j < c.num_sites; ++j) c.zz.push_back({i, j, p.J[i][j]});
  c.site_z = p.delta_z;
  return c;
}

}  // namespace tfim
