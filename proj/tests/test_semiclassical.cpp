#include <cmath>

#include <gtest/gtest.h>

#include "tfim/exact.hpp"
#include "tfim/semiclassical.hpp"

using namespace tfim;
namespace sc = tfim::semiclassical;

namespace {

double norm2(const sc::Vec3& v) { return v[0] * v[0] + v[1] * v[1] + v[2] * v[2]; }

sc::RunOptions tw(int n_t, std::uint64_t seed) {
  sc::RunOptions o;
  o.n_t = n_t;
  o.seed = seed;
  return o;
}

}  // namespace

TEST(SemiclassicalInit, MeanFieldPoint) {
  const auto one = sc::smf_initial(1);
  ASSERT_EQ(one.s.size(), 1u);
  EXPECT_EQ(one.s[0], (sc::Vec3{0.0, 0.0, -1.0}));
  for (const auto& v : sc::smf_initial(9).s) EXPECT_EQ(norm2(v), 1.0);
}

TEST(SemiclassicalInit, WignerSamples) {
  const int n_t = 10000;
  const auto ens = sc::sample_initial(4, n_t, 42);
  ASSERT_EQ(ens.trajectories.size(), static_cast<std::size_t>(n_t));
  for (int i = 0; i < 4; ++i) {
    double sx = 0.0, sy = 0.0, sz = 0.0;
    for (const auto& tr : ens.trajectories) {
      EXPECT_TRUE(std::abs(tr.s[i][0]) == 1.0 && std::abs(tr.s[i][1]) == 1.0);
      sx += tr.s[i][0];
      sy += tr.s[i][1];
      sz += tr.s[i][2];
    }
    EXPECT_EQ(sz / n_t, -1.0);
    EXPECT_LT(std::abs(sx / n_t), 4.0 / std::sqrt(n_t));
    EXPECT_LT(std::abs(sy / n_t), 4.0 / std::sqrt(n_t));
  }
  const auto again = sc::sample_initial(4, n_t, 42);
  for (int k = 0; k < n_t; ++k) EXPECT_EQ(ens.trajectories[k].s, again.trajectories[k].s);
  try {
    sc::sample_initial(4, 0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::config);
  }
}

TEST(SemiclassicalRhs, CrossProductStructure) {
  const auto one = build_grid(1, 1);
  std::vector<sc::Vec3> ds;
  sc::classical_rhs({{0.0, 0.0, -1.0}}, ising_couplings(one, {}), {1.0, 0.0}, ds);
  EXPECT_EQ(ds[0][0], 0.0);
  EXPECT_EQ(std::abs(ds[0][1]), 2.0);
  EXPECT_EQ(ds[0][2], 0.0);

  sc::classical_rhs({{0.3, -0.4, 0.5}}, ising_couplings(one, {}), {0.0, 0.0}, ds);
  EXPECT_EQ(ds[0], (sc::Vec3{0.0, 0.0, 0.0}));

  const auto two = build_grid(1, 2);
  sc::classical_rhs({{1.0, 1.0, -1.0}, {-1.0, 1.0, -1.0}}, ising_couplings(two, {}), {0.0, 0.0}, ds);
  EXPECT_EQ(ds[0][2], 0.0);
  EXPECT_EQ(ds[1][2], 0.0);
}

TEST(SemiclassicalRun, ZeroFieldMeanFieldIsStatic) {
  const auto lat = build_lattice(3);
  const auto s = sc::run_protocol(sc::Method::smf, lat, make_quench(0.0, 0.3, 1.0), 0.01, uniform_times(1.0, 0.1), {});
  for (const auto& m : s.mag)
    for (double v : m) EXPECT_EQ(v, -1.0);
}

TEST(SemiclassicalRun, MeanFieldHasNoConnectedCorrelations) {
  const auto lat = build_lattice(4);
  const Schedule a = make_anneal(AnnealVariant::I, 1.0);
  const auto s =
      sc::run_protocol(sc::Method::smf, lat, a, 0.01, uniform_times(a.t_final(), 0.25), {});
  for (std::size_t k = 0; k < s.size(); ++k) {
    for (double c : s.corr_line[k]) EXPECT_EQ(c, 0.0);
    for (double c : s.corr_pairs[k]) EXPECT_EQ(c, 0.0);
    EXPECT_EQ(s.error_record[k], 0.0);
  }
}

TEST(SemiclassicalRun, ExhaustiveSingleSpinIsRabi) {
  const double hx = 0.7;
  const auto s = sc::run_protocol(sc::Method::tw, build_grid(1, 1), make_quench(hx, 0.0, 5.0), 0.001,
                                  uniform_times(5.0, 0.1), tw(4, 0));
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_NEAR(s.mag[k][0], -std::cos(2.0 * hx * s.times[k]), 1e-10);
}

TEST(SemiclassicalRun, SampledSingleSpinWithinStatisticalError) {
  const int n_t = 10000;
  const auto lat = build_grid(1, 1);
  const auto rec = uniform_times(2.0, 0.25);
  const std::vector<sc::SpinTrajectory> trajs = sc::sample_initial(1, n_t, 5).trajectories;
  const auto s = sc::run_trajectories(lat, ising_couplings(lat, {}), make_quench(1.0, 0.0, 2.0), 0.005, rec, trajs,
                                      "tw", false, 5);
  for (std::size_t k = 0; k < s.size(); ++k)
    EXPECT_LT(std::abs(s.mag[k][0] + std::cos(2.0 * s.times[k])), 5.0 / std::sqrt(n_t));
}

TEST(SemiclassicalRun, ShortTimeHighFieldAgreesWithExact) {
  const auto lat = build_lattice(3);
  const Schedule q = make_quench(3.0, 0.0, 1.0);
  const auto rec = uniform_times(1.0, 0.05);
  const auto ex = exact::evolve(lat, IsingParams{}, q, 0.01, rec);
  const auto w = sc::run_protocol(sc::Method::tw, lat, q, 0.005, rec, tw(10000, 17));
  double worst = 0.0;
  for (std::size_t k = 0; k < ex.size(); ++k)
    worst = std::max(worst, std::abs(w.mag[k][lat.center_site] - ex.mag[k][lat.center_site]));
  EXPECT_LT(worst, 0.05);
  RecordProperty("max_center_deviation", std::to_string(worst));
}

TEST(SemiclassicalRk4, ConservesSpinLengthAndEnergy) {
  const auto lat = build_lattice(3);
  const Couplings c = ising_couplings(lat, {});
  const Schedule q = make_quench(1.3, 0.4, 3.0);
  for (auto traj : {sc::smf_initial(9), sc::sample_initial(9, 1, 3).trajectories[0]}) {
    auto s = traj.s;
    const double e0 = sc::classical_energy(s, c, q.eval(0.0));
    for (int k = 0; k < 3000; ++k) sc::rk4_step(s, c, q, k * 0.001, 0.001);
    for (std::size_t i = 0; i < s.size(); ++i)
      EXPECT_NEAR(norm2(s[i]), norm2(traj.s[i]), 1e-8 * norm2(traj.s[i]));
    EXPECT_NEAR(sc::classical_energy(s, c, q.eval(3.0)), e0, 1e-8 * std::abs(e0));
  }
}

TEST(SemiclassicalRun, UnsampledWignerEqualsMeanField) {
  const auto lat = build_lattice(3);
  const Schedule a = make_anneal(AnnealVariant::II, 1.0);
  const auto rec = uniform_times(a.t_final(), 0.5);
  const auto smf = sc::run_protocol(sc::Method::smf, lat, a, 0.01, rec, {});
  const auto single = sc::run_trajectories(lat, ising_couplings(lat, {}), a, 0.01, rec, {sc::smf_initial(9)}, "tw",
                                           false, 0);
  ASSERT_EQ(smf.size(), single.size());
  for (std::size_t k = 0; k < smf.size(); ++k) {
    EXPECT_EQ(smf.mag[k], single.mag[k]);
    EXPECT_EQ(smf.corr_line[k], single.corr_line[k]);
  }
}

TEST(SemiclassicalRun, StandardErrorScalesWithSampleCount) {
  const auto lat = build_lattice(3);
  const Schedule q = make_quench(2.0, 0.0, 0.5);
  const std::vector<double> rec{0.5};
  const auto small = sc::run_protocol(sc::Method::tw, lat, q, 0.01, rec, tw(1000, 9));
  const auto large = sc::run_protocol(sc::Method::tw, lat, q, 0.01, rec, tw(16000, 9));
  const double ratio = small.error_record.back() / large.error_record.back();
  EXPECT_NEAR(ratio, 4.0, 0.8);
  ASSERT_TRUE(large.has_stderr());
  for (std::size_t i = 0; i < 9; ++i) EXPECT_GT(large.mag_stderr.back()[i], 0.0);
}

TEST(SemiclassicalRun, RejectsCoarseStep) {
  try {
    sc::run_protocol(sc::Method::smf, build_lattice(2), make_quench(1.0, 0.0, 1.0), 0.05, {1.0}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::domain);
  }
}
