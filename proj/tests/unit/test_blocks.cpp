#include <gtest/gtest.h>

#include <cmath>

#include "slowbond/blocks.hpp"

using namespace slowbond;

namespace {

TrajectorySample single(const SpinConfig& c, std::vector<double> times) {
  TrajectorySample t;
  t.times = times;
  t.spins.assign(times.size(), c);
  t.flux.assign(times.size(), 0);
  return t;
}

}  // namespace

TEST(Averages, BlockProductByHand) {
  auto c = SpinConfig::from_ints({1, -1, 1, 1, -1, 1, 1});
  // y = 0: eta_0 = 1 times mean(-1, 1, 1) = 1/3
  EXPECT_NEAR(block_product(c, 0, 3), 1.0 / 3.0, 1e-15);
  // y = 1: eta_1 = -1 times eta_2 = -1
  EXPECT_EQ(block_product(c, 1, 1), -1.0);
}

TEST(Averages, ConstantConfiguration) {
  auto c = SpinConfig::from_ints(std::vector<int>(15, 1));
  auto traj = single(c, {0.0, 0.1, 0.2});
  for (long l : {1L, 3L, 7L}) {
    auto a = spatial_average(traj, l, 0);
    for (double v : a.values) EXPECT_EQ(v, 1.0);
  }
  auto d = comparison_average(traj, 2, 5, 0);
  for (double v : d.values) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(spatial_average(traj, 0, 0), ValidationError);
  EXPECT_THROW(spatial_average(traj, 8, 0), ValidationError);
}

TEST(Averages, LengthZeroIsTheBareProduct) {
  Rng rng(40);
  auto c = sample_grand_canonical(rng, 21);
  auto traj = single(c, {0.0});
  auto a = comparison_average(traj, 0, 4, 2);
  auto b = comparison_average(traj, 1, 4, 2);
  EXPECT_EQ(a.values, b.values);
}

TEST(Averages, TimeAverageExactOnLinear) {
  AveragedStatistic a;
  for (int i = 0; i <= 10; ++i) {
    a.times.push_back(0.1 * i);
    a.values.push_back(2.0 + 3.0 * 0.1 * i);
  }
  auto t = time_average(a, 0.25);
  for (std::size_t i = 0; i + 3 < a.times.size(); ++i)
    EXPECT_NEAR(t.values[i], 2.0 + 3.0 * (a.times[i] + 0.125), 1e-12);
  EXPECT_TRUE(t.truncated);
  auto same = time_average(a, 0.0);
  EXPECT_EQ(same.values, a.values);
}

TEST(Averages, InterpolateLinear) {
  std::vector<double> t{0.0, 1.0, 2.0}, f{0.0, 10.0, 30.0};
  EXPECT_NEAR(interpolate(t, f, 0.5), 5.0, 1e-14);
  EXPECT_NEAR(interpolate(t, f, 1.5), 20.0, 1e-14);
}

class ErrorFieldTest : public ::testing::Test {
 protected:
  void SetUp() override {
    RawParams r;
    r.N = 16;
    r.beta_star = 0.1;
    r.window = 65;
    r.slow_bonds = {0};
    p = validate_params(r);
    k = derive_constants(p);
    s = build_schedule(p, 0.01, 0.01);
    res = residual_decomposition(p);
    Rng rng(41);
    RunOptions opt;
    opt.t_final = 0.02;
    opt.snapshot_dt = 0.002;
    run_ = run(sample_grand_canonical(rng, 65), k, opt, rng);
    ch = build_ch_field(run_.traj, k);
    K = kernel_table(inhomogeneous_generator(k), {Ring(65).index(0)}, 0.002, ch.Z.nt());
    E = error_fields(ch, run_.traj, K, s, res, p);
  }
  ModelParams p;
  DerivedConstants k;
  ScaleSchedule s;
  ResidualDecomposition res;
  RunResult run_;
  CHField ch;
  KernelTable K;
  ErrorFieldSet E;
};

TEST_F(ErrorFieldTest, Telescoping) {
  for (std::size_t i = 0; i < E[kE_I].data.size(); ++i) {
    double scale = std::abs(E[kE_I].data[i]) + std::abs(E[kE_I4].data[i]) + 1e-300;
    EXPECT_NEAR(E[kE_I].data[i], E[kE_I1].data[i] + E[kE_I3].data[i] + E[kE_I4].data[i], 1e-12 * scale);
    EXPECT_NEAR(E[kE_I5].data[i], E[kE_I1].data[i] - E[kE_I2].data[i],
                1e-12 * (std::abs(E[kE_I1].data[i]) + std::abs(E[kE_I2].data[i]) + 1e-300));
  }
  for (int piece = 0; piece < kPieceCount; ++piece)
    for (int x = 0; x < 65; ++x) EXPECT_EQ(E[piece](0, x), 0.0);
}

TEST_F(ErrorFieldTest, HandQuadrature) {
  // E_I at the third snapshot, written out: trapezoid over S = 0, dt, 2 dt
  const int y = Ring(65).index(0);
  const double dt = 0.002, C = static_cast<double>(res.C_N);
  auto q = [&](std::size_t t) { return double(run_.traj.spins[t].spins[y] * run_.traj.spins[t].spins[y + 1]); };
  auto P = [&](double tau) { return solve_kernel(k, 0.0, tau).P; };
  Eigen::MatrixXd P0 = P(0.0), P1 = P(dt), P2 = P(2 * dt);
  for (int x = 0; x < 65; x += 7) {
    double want = 0.5 * dt * P2(x, y) * C * q(0) * ch.Z(0, y) + dt * P1(x, y) * C * q(1) * ch.Z(1, y) +
                  0.5 * dt * P0(x, y) * C * q(2) * ch.Z(2, y);
    EXPECT_NEAR(E[kE_I](2, x), want, 1e-10 * (std::abs(want) + 1e-12));
  }
}

TEST(ErrorBound, CountsViolations) {
  auto r = error_bound_check({0.0, 10.0}, {0.0, 0.0}, {1.0, 1.0}, 16, 0.0, 0.0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(r.violation_fraction, 0.5);
  EXPECT_DOUBLE_EQ(r.violation_fraction_linear, 0.5);
}

TEST(TwoBlock, RegionSize) {
  EXPECT_EQ(two_block_region_size(1, 7), 14);
  EXPECT_EQ(two_block_region_size(2, 4), 17);
  Rng rng(42);
  EXPECT_THROW(two_block_sample(rng, 4, 2, 0.0), ValidationError);
}

TEST(TwoBlock, MeanAtHalfFillingMatchesGaussian) {
  // difference of two disjoint sums of 100 nearly independent fair spins: E|.| ~ sqrt(2/pi) sqrt(200)/100
  Rng rng(43);
  const long n = 20000;
  std::vector<double> v(n);
  for (long i = 0; i < n; ++i) v[i] = two_block_sample(rng, 100, 700, 0.0);
  EXPECT_NEAR(mean(v), 0.1128, 0.003);
}

TEST(TwoBlock, AzumaSlope) {
  Rng rng(44);
  auto r = azuma_canonical_check(rng, {16, 64, 256}, {0.0, 0.5}, 4000);
  EXPECT_TRUE(r.pass);
  for (double s : r.slopes) EXPECT_NEAR(s, -0.5, 0.1);
}
