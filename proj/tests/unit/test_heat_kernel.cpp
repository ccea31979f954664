#include <gtest/gtest.h>

#include <cmath>

#include <boost/math/special_functions/bessel.hpp>

#include "slowbond/heat_kernel.hpp"

using namespace slowbond;

namespace {

DerivedConstants constants(int N, double beta, int window, std::vector<int> slow = {0},
                           Diffusivity conv = Diffusivity::Matched) {
  RawParams r;
  r.N = N;
  r.beta_star = beta;
  r.window = window;
  r.eps_star2 = slow.size() > 1 ? 1.0 : 0.0;
  r.slow_bonds = std::move(slow);
  return derive_constants(validate_params(r), conv);
}

}  // namespace

TEST(Bessel, ScaledAgainstBoost) {
  for (double x : {0.01, 0.5, 3.0, 20.0, 150.0, 600.0}) {
    auto b = scaled_bessel_i(x, 60);
    for (int n = 0; n <= 60; ++n) {
      double ref = boost::math::cyl_bessel_i(n, x) * std::exp(-x);
      if (ref < 1e-290) continue;
      EXPECT_NEAR(b[n], ref, 1e-11 * ref) << "x " << x << " n " << n;
    }
  }
  EXPECT_EQ(scaled_bessel_i(0.0, 3)[0], 1.0);
  EXPECT_THROW(scaled_bessel_i(-1.0, 3), std::invalid_argument);
}

TEST(Bessel, LargeArgumentWithoutOverflow) {
  auto b = scaled_bessel_i(1e5, 10);
  double asym = 1.0 / std::sqrt(2 * M_PI * 1e5);
  EXPECT_NEAR(b[0], asym, 1e-5 * asym);
}

TEST(Kernel, MethodsAgree) {
  auto k = constants(16, 0.25, 33);
  for (double t : {0.001, 0.02, 0.3}) {
    auto U = solve_kernel(k, 0.0, t, KernelMethod::Uniformization);
    auto E = solve_kernel(k, 0.0, t, KernelMethod::Expm);
    auto O = solve_kernel(k, 0.0, t, KernelMethod::Ode);
    EXPECT_LT((U.P - E.P).cwiseAbs().maxCoeff(), 1e-11) << t;
    EXPECT_LT((U.P - O.P).cwiseAbs().maxCoeff(), 1e-8) << t;
  }
}

TEST(Kernel, TwistedMethodsAgree) {
  auto k = constants(16, 0.25, 33);
  Generator g = inhomogeneous_generator(k);
  g.twist = 0.7;
  auto E = solve_kernel(g, 0.0, 0.05, KernelMethod::Expm);
  auto O = solve_kernel(g, 0.0, 0.05, KernelMethod::Ode);
  EXPECT_LT((E.P - O.P).cwiseAbs().maxCoeff(), 1e-8 * E.P.cwiseAbs().maxCoeff());
}

TEST(Kernel, StochasticNonnegativeAndSemigroup) {
  auto k = constants(32, 0.1, 65);
  auto P1 = solve_kernel(k, 0.0, 0.01);
  auto P2 = solve_kernel(k, 0.01, 0.04);
  auto P12 = solve_kernel(k, 0.0, 0.04);
  EXPECT_LT(max_row_sum_deviation(P12.P), 1e-12);
  EXPECT_GE(P12.P.minCoeff(), -1e-15);
  EXPECT_LT((P1.P * P2.P - P12.P).cwiseAbs().maxCoeff(), 1e-12);
  auto Z = solve_kernel(k, 0.3, 0.3);
  EXPECT_TRUE(Z.P.isIdentity());
  EXPECT_THROW(solve_kernel(k, 0.2, 0.1), ValidationError);
}

TEST(Kernel, InvariantMeasureIsInverseDiffusivity) {
  auto k = constants(16, 0.5, 33);
  auto P = solve_kernel(k, 0.0, 0.2);
  auto m = weighted_column_mass(P.P, k.diffusivity);
  for (int y = 0; y < 33; ++y) EXPECT_NEAR(m[y] * k.diffusivity[y], 1.0, 1e-10);
}

TEST(Kernel, HomogeneousBesselFormMatchesMatrix) {
  auto k = constants(16, 0.25, 33);
  for (double t : {0.002, 0.05, 1.0}) {
    auto B = homogeneous_kernel(k, 0.0, t);
    auto U = solve_kernel(homogeneous_generator(k), 0.0, t);
    EXPECT_LT((B.P - U.P).cwiseAbs().maxCoeff(), 1e-12) << t;
  }
}

TEST(Kernel, MaxPrinciple) {
  auto k = constants(16, 0.25, 33);
  auto a = solve_kernel(k, 0, 0.01).P, b = solve_kernel(k, 0, 0.02).P, c = solve_kernel(k, 0, 0.04).P;
  auto r = max_principle_check({&a, &b, &c});
  EXPECT_TRUE(r.pass);
  EXPECT_TRUE(r.sup_nonincreasing);
}

TEST(Kernel, WalkOracleAgrees) {
  auto k = constants(8, 0.25, 17);
  Generator g = inhomogeneous_generator(k);
  Rng rng(30);
  const double t = 0.05;
  const int x0 = Ring(17).index(0);
  auto w = random_walk_oracle(g, rng, 100000, t, x0);
  auto P = solve_kernel(g, 0.0, t);
  Eigen::VectorXd row = P.P.row(x0).transpose();
  EXPECT_LT(total_variation(w.distribution, row), 0.01);
  // tail bound holds for the empirical displacement
  double mean_jumps = g.max_rate() * t;
  for (double L : {3.0, 6.0, 10.0}) {
    double frac = 0.0;
    for (long d : w.displacement) frac += std::abs(d) >= L;
    frac /= static_cast<double>(w.displacement.size());
    EXPECT_LE(frac, walk_tail_bound(L, mean_jumps) + 0.005);
  }
}

TEST(Duhamel, ResidualShrinksWithQuadratureStep) {
  auto k = constants(8, 0.25, 65);
  const double T = 0.05;
  auto P = solve_kernel(k, 0.0, T);
  auto B = homogeneous_kernel(k, 0.0, T);
  auto coarse = duhamel_residual(P, B, k, T / 50);
  auto fine = duhamel_residual(P, B, k, T / 100);
  EXPECT_LT(fine.residual, coarse.residual);
  // midpoint rule: second order
  EXPECT_NEAR(coarse.residual / fine.residual, 4.0, 0.5);
  EXPECT_LT(duhamel_residual(P, B, k, T * 1e-4).residual, 1e-6);
}

TEST(Duhamel, VanishesWithoutSlowBonds) {
  auto k = constants(8, 0.0, 33, {});
  auto P = solve_kernel(k, 0.0, 0.02);
  auto B = homogeneous_kernel(k, 0.0, 0.02);
  EXPECT_LT(duhamel_residual(P, B, k, 0.001).residual, 1e-12);
}

TEST(Nash, PointMassRatio) {
  for (int N : {1, 4, 16, 100}) EXPECT_NEAR(nash_ratio({1.0}, N), std::pow(2.0 * N * N, -1.0 / 3.0), 1e-14);
  EXPECT_EQ(nash_ratio({0.0, 0.0}, 4), 0.0);
}

TEST(Nash, RatioScaleInvariant) {
  std::vector<double> phi{0.3, 1.0, 0.7, 0.2}, twice;
  for (double v : phi) twice.push_back(2 * v);
  EXPECT_NEAR(nash_ratio(phi, 16), nash_ratio(twice, 16), 1e-14);
}

TEST(Nash, OnDiagonalFitAtZeroBeta) {
  auto k = constants(32, 0.0, wrap_safe_window(32, 1.0), {});
  auto rep = nash_on_diagonal_fit(k);
  EXPECT_FALSE(rep.inconclusive);
  EXPECT_NEAR(rep.exponent, -0.5, 0.1);
  EXPECT_LE(rep.constant, 1.0);
}

TEST(Window, WrapSafe) {
  EXPECT_EQ(wrap_safe_window(16, 1.0), 257);
  EXPECT_EQ(wrap_safe_window(2, 0.01), 33);
  EXPECT_EQ(wrap_safe_window(64, 0.25) % 2, 1);
}

TEST(Gap, PerturbativeGapShrinksAwayFromDefect) {
  RawParams r;
  r.N = 32;
  r.beta_star = 0.1;
  r.window = 257;
  auto p = validate_params(r);
  auto k = derive_constants(p);
  auto s = build_schedule(p, 0.01, 0.01);
  auto P = solve_kernel(k, 0.0, 0.05);
  auto B = homogeneous_kernel(k, 0.0, 0.05);
  auto g = perturbative_gap(P, B, p, s);
  EXPECT_LE(g.sup_outside, g.sup_all);
  EXPECT_GT(g.sup_all, 0.0);
  ASSERT_EQ(g.weighted_all.size(), 3u);
  EXPECT_GE(g.weighted_all[0], g.sup_all);
}

TEST(Regularity, GradientOfKernel) {
  auto k = constants(16, 0.0, 65, {});
  auto P = solve_kernel(k, 0.0, 0.05).P;
  EXPECT_EQ(sup_space_gradient(P, 0), 0.0);
  EXPECT_GT(sup_space_gradient(P, 1), 0.0);
  EXPECT_LE(sup_space_gradient(P, 1), sup_space_gradient(P, 4));
}
