#include <cmath>
#include <complex>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "tfim/diagnostics.hpp"
#include "tfim/exact.hpp"
#include "tfim/mps.hpp"

using namespace tfim;
using diag::ObservableClass;

namespace {

// The eight grid symmetries built from geometry: rotate or reflect the site
// position about the grid center in the complex plane.
std::vector<std::vector<int>> geometric_maps(int L) {
  const double c = 0.5 * (L - 1);
  std::vector<std::vector<int>> out;
  for (int reflect = 0; reflect < 2; ++reflect) {
    for (int quarter = 0; quarter < 4; ++quarter) {
      std::vector<int> m;
      for (int r = 0; r < L; ++r) {
        for (int col = 0; col < L; ++col) {
          std::complex<double> z(col - c, r - c);
          if (reflect) z = std::conj(z);
          z *= std::pow(std::complex<double>(0, 1), quarter);
          m.push_back(static_cast<int>(std::lround(z.imag() + c)) * L + static_cast<int>(std::lround(z.real() + c)));
        }
      }
      out.push_back(m);
    }
  }
  return out;
}

// Direct transcription of the per-site definition, over the geometric maps.
std::pair<double, double> brute_force(const std::vector<double>& v, int L, int site, double xi) {
  double eps = 0.0, mean = 0.0;
  for (const auto& m : geometric_maps(L)) {
    eps = std::max(eps, std::abs(v[site] - v[m[site]]));
    mean += std::abs(v[m[site]]);
  }
  mean /= 8.0;
  return {eps, eps / std::max(mean, xi)};
}

std::vector<int> compose(const std::vector<int>& f, const std::vector<int>& g) {
  std::vector<int> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[g[i]];
  return out;
}

}  // namespace

TEST(D4, SingleSiteMapsAreIdentity) {
  for (const auto& m : diag::d4_maps(1)) EXPECT_EQ(m, std::vector<int>{0});
}

TEST(D4, QuarterTurnOnTwoByTwo) {
  const auto rot = diag::d4_maps(2)[1];
  // (0,0) -> (0,1) -> (1,1) -> (1,0)
  EXPECT_EQ(rot[0], 1);
  EXPECT_EQ(rot[1], 3);
  EXPECT_EQ(rot[3], 2);
  EXPECT_EQ(rot[2], 0);
}

TEST(D4, GroupStructure) {
  for (int L : {2, 3, 4, 5}) {
    const auto maps = diag::d4_maps(L);
    std::set<std::vector<int>> elements(maps.begin(), maps.end());
    EXPECT_EQ(elements.size(), 8u);
    const auto geo = geometric_maps(L);
    EXPECT_EQ(elements, std::set<std::vector<int>>(geo.begin(), geo.end()));
    for (const auto& m : maps) {
      std::vector<int> sorted = m;
      std::sort(sorted.begin(), sorted.end());
      for (int i = 0; i < L * L; ++i) EXPECT_EQ(sorted[i], i);
    }
    for (const auto& f : maps)
      for (const auto& g : maps) EXPECT_TRUE(elements.count(compose(f, g)));
    EXPECT_EQ(compose(maps[1], maps[1]), maps[2]);
  }
}

TEST(Symmetry, SymmetricFieldsHaveNoError) {
  const int L = 5;
  std::vector<double> radial, flat(L * L, 0.7);
  for (int r = 0; r < L; ++r)
    for (int c = 0; c < L; ++c) radial.push_back(std::hypot(r - 2.0, c - 2.0));
  const auto a = diag::symmetry_error(radial, L, 0.01);
  EXPECT_EQ(a.eps_max, 0.0);
  EXPECT_TRUE(a.converged);
  const auto b = diag::symmetry_error(flat, L, 0.01);
  EXPECT_EQ(b.eps_max, 0.0);
  EXPECT_EQ(b.eps_rel_max, 0.0);
}

TEST(Symmetry, PerturbedCorner) {
  std::vector<double> v(9, 0.0);
  v[0] = 0.2;
  const auto r = diag::symmetry_error(v, 3, 0.1);
  EXPECT_DOUBLE_EQ(r.eps[0], 0.2);
  EXPECT_DOUBLE_EQ(r.eps_rel[0], 2.0);
  EXPECT_FALSE(r.converged);
  const auto [eps, rel] = brute_force(v, 3, 0, 0.1);
  EXPECT_DOUBLE_EQ(r.eps[0], eps);
  EXPECT_DOUBLE_EQ(r.eps_rel[0], rel);
}

TEST(Symmetry, MatchesBruteForceOnRandomFields) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int L : {2, 3, 4}) {
    std::vector<double> v(L * L);
    for (double& x : v) x = u(rng);
    const auto r = diag::symmetry_error(v, L, 0.01);
    for (int i = 0; i < L * L; ++i) {
      const auto [eps, rel] = brute_force(v, L, i, 0.01);
      EXPECT_DOUBLE_EQ(r.eps[i], eps);
      EXPECT_DOUBLE_EQ(r.eps_rel[i], rel);
      EXPECT_GE(r.eps[i], 0.0);
    }
    EXPECT_EQ(r.converged, r.eps_rel_max < 0.4);
  }
}

TEST(Symmetry, InvariantUnderRelabeling) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int L = 4;
  std::vector<double> v(L * L);
  for (double& x : v) x = u(rng);
  const auto base = diag::symmetry_error(v, L, 0.01);
  for (const auto& m : diag::d4_maps(L)) {
    std::vector<double> moved(v.size());
    for (int i = 0; i < L * L; ++i) moved[m[i]] = v[i];
    const auto r = diag::symmetry_error(moved, L, 0.01);
    EXPECT_DOUBLE_EQ(r.eps_max, base.eps_max);
    EXPECT_DOUBLE_EQ(r.eps_rel_max, base.eps_rel_max);
    for (int i = 0; i < L * L; ++i) EXPECT_DOUBLE_EQ(r.eps[m[i]], base.eps[i]);
  }
}

TEST(Symmetry, LengthMismatchIsRejected) {
  EXPECT_THROW(diag::symmetry_error(std::vector<double>(8, 0.0), 3, 0.01), Error);
}

TEST(SymmetryCorr, PairField) {
  const auto lat = build_lattice(3);
  diag::PairValues pv;
  for (const auto& e : lat.nn_edges) pv[{e.a, e.b}] = 0.3;
  EXPECT_EQ(diag::symmetry_error_corr(pv, 3, 0.005).eps_max, 0.0);

  // center-row pair (3, 4); its quarter-turn image is the center-column pair (1, 4)
  pv[{3, 4}] = 0.4;
  const auto r = diag::symmetry_error_corr(pv, 3, 0.005);
  EXPECT_GE(r.eps_max, 0.1 - 1e-15);

  diag::PairValues partial{{{3, 4}, 0.1}};
  try {
    diag::symmetry_error_corr(partial, 3, 0.005);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::incomplete_data);
  }
}

TEST(SymmetryCorr, ExactDynamicsStaySymmetric) {
  const auto lat = build_lattice(3);
  const auto s = exact::evolve(lat, IsingParams{}, make_quench(2.0, 0.0, 3.0), 0.01, uniform_times(3.0, 0.1));
  for (std::size_t k = 0; k < s.size(); ++k) {
    EXPECT_LT(diag::symmetry_at(s, k, ObservableClass::magnetization, 0.01).eps_max, 1e-10);
    EXPECT_LT(diag::symmetry_at(s, k, ObservableClass::correlation, 0.005).eps_max, 1e-10);
  }
}

TEST(ConvergedUntil, LastRecordBeforeViolation) {
  const auto lat = build_lattice(3);
  ObservableSeries s = make_series("synthetic", lat, "none", 0.1);
  for (int k = 0; k < 6; ++k) {
    std::vector<double> mag(9, -1.0);
    if (k >= 4) mag[0] = -0.2;  // corner breaks the symmetry from t = 0.4 on
    append_record(s, lat, 0.1 * k, mag, [](int, int) { return 1.0; }, 0.0);
  }
  EXPECT_DOUBLE_EQ(diag::converged_until(s, ObservableClass::magnetization, 0.01), 0.3);

  ObservableSeries bad = make_series("synthetic", lat, "none", 0.1);
  std::vector<double> mag(9, 0.0);
  mag[0] = 1.0;
  append_record(bad, lat, 0.0, mag, [](int, int) { return 0.0; }, 0.0);
  EXPECT_EQ(diag::converged_until(bad, ObservableClass::magnetization, 0.01), 0.0);
}

TEST(ConvergedUntil, TruncatedMpsLosesSymmetryExactDoesNot) {
  const auto lat = build_lattice(3);
  const Schedule q = make_quench(2.0, 0.0, 5.0);
  const auto rec = uniform_times(5.0, 0.1);
  const auto ex = exact::evolve(lat, IsingParams{}, q, 0.01, rec);
  mps::RunOptions o;
  o.chi_max = 2;
  const auto mp = mps::run_protocol(lat, q, 0.01, rec, o);
  const double xi = diag::default_xi(ObservableClass::magnetization);
  EXPECT_DOUBLE_EQ(diag::converged_until(ex, ObservableClass::magnetization, xi), 5.0);
  const double horizon = diag::converged_until(mp, ObservableClass::magnetization, xi);
  EXPECT_LT(horizon, 5.0);
  RecordProperty("chi2_horizon", std::to_string(horizon));
}

TEST(KZ, ReferenceRampIsIdentity) {
  const diag::KZCurve a{2.0, {1, 2, 3}, {0.5, 0.2, 0.1}};
  const diag::KZCurve b{5.0, {1, 2, 3}, {0.4, 0.3, 0.2}};
  const auto set = diag::kz_rescale({a, b}, {}, 2.0);
  EXPECT_EQ(set.x[0], a.delta);
  EXPECT_EQ(set.y[0], a.C);
}

TEST(KZ, UnitExponentHalvesDistances) {
  const diag::KZExponents e{1.0, 1.0, 0.0};
  EXPECT_DOUBLE_EQ(diag::kz_length(4.0, 1.0, e), 2.0);
  const auto set = diag::kz_rescale({{1.0, {2, 4}, {1, 1}}, {4.0, {2, 4}, {1, 1}}}, e);
  EXPECT_DOUBLE_EQ(set.x[1][0], 1.0);
  EXPECT_DOUBLE_EQ(set.x[1][1], 2.0);
}

TEST(KZ, SyntheticScalingFormCollapses) {
  const diag::KZExponents e;
  const double two_delta = 1.0 + e.eta;
  auto f = [](double x) { return std::exp(-x * x); };
  auto family = [&](const diag::KZExponents& truth) {
    std::vector<diag::KZCurve> curves;
    for (double tau : {1.0, 2.0, 4.0, 8.0}) {
      const double xi = diag::kz_length(tau, 1.0, truth);
      diag::KZCurve c{tau, {}, {}};
      for (int k = 0; k <= 40; ++k) {
        const double x = 0.05 * k;
        c.delta.push_back(x * xi);
        c.C.push_back(std::pow(xi, -two_delta) * f(x));
      }
      curves.push_back(c);
    }
    return curves;
  };
  const auto curves = family(e);
  const auto set = diag::kz_rescale(curves, e);
  for (std::size_t i = 1; i < set.x.size(); ++i)
    for (std::size_t k = 0; k < set.x[i].size(); ++k) {
      EXPECT_NEAR(set.x[i][k], set.x[0][k], 1e-12);
      EXPECT_NEAR(set.y[i][k], set.y[0][k], 1e-12);
    }
  const double good = diag::collapse_quality(set);
  EXPECT_LT(good, 1e-10);
  const double bad = diag::collapse_quality(diag::kz_rescale(curves, {e.nu + 0.3, e.z, e.eta}));
  EXPECT_GT(bad, good);
  EXPECT_GT(bad, 1e-6);
  const double slight = diag::collapse_quality(diag::kz_rescale(curves, {e.nu + 0.1, e.z, e.eta}));
  EXPECT_GT(slight, good);
}

TEST(KZ, IdenticalCurvesHaveZeroQuality) {
  diag::KZCurveSet set;
  set.x = {{0, 1, 2}, {0, 1, 2}};
  set.y = {{1, 0.5, 0.1}, {1, 0.5, 0.1}};
  EXPECT_EQ(diag::collapse_quality(set), 0.0);
}

TEST(KZ, UnrescaleRoundTrip) {
  const std::vector<diag::KZCurve> curves{{1.5, {1, 2, 3}, {0.3, -0.1, 0.05}}, {3.7, {1, 2, 3}, {0.2, 0.07, -0.01}}};
  const auto back = diag::kz_unrescale(diag::kz_rescale(curves, {}));
  ASSERT_EQ(back.size(), curves.size());
  for (std::size_t i = 0; i < curves.size(); ++i) {
    EXPECT_EQ(back[i].tau, curves[i].tau);
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_NEAR(back[i].delta[k], curves[i].delta[k], 1e-14);
      EXPECT_NEAR(back[i].C[k], curves[i].C[k], 1e-15);
    }
  }
}

TEST(KZ, Errors) {
  auto category = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.category();
    }
    return ErrorCategory::io;
  };
  const diag::KZCurve a{1.0, {1, 2}, {1, 0.5}};
  EXPECT_EQ(category([&] { diag::kz_rescale({a}, {}); }), ErrorCategory::incomparable_curves);
  EXPECT_EQ(category([&] { diag::kz_rescale({a, {-1.0, {1, 2}, {1, 0.5}}}, {}); }), ErrorCategory::domain);
  EXPECT_EQ(category([&] { diag::kz_rescale({a, a}, {}); }), ErrorCategory::domain);
  diag::KZCurveSet disjoint;
  disjoint.x = {{0, 1}, {2, 3}};
  disjoint.y = {{1, 1}, {1, 1}};
  EXPECT_EQ(category([&] { diag::collapse_quality(disjoint); }), ErrorCategory::incomparable_curves);
}
