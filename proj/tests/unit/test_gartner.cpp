#include <gtest/gtest.h>

#include <cmath>

#include "slowbond/gartner.hpp"

using namespace slowbond;

namespace {

ModelParams params(int N, double beta, int window, std::vector<int> slow = {0}) {
  RawParams r;
  r.N = N;
  r.beta_star = beta;
  r.window = window;
  r.slow_bonds = std::move(slow);
  return validate_params(r);
}

std::vector<double> z_of(const SpinConfig& c, long flux, double lambda) {
  std::vector<double> h(c.size());
  fill_height(c, flux, lambda, h.data());
  for (auto& v : h) v = std::exp(-v);
  return h;
}

}  // namespace

TEST(Height, IncrementsAreWeightedSpins) {
  auto c = SpinConfig::from_ints({1, -1, -1, 1, 1, -1, 1});
  std::vector<double> h(7);
  fill_height(c, 3, 0.25, h.data());
  Ring ring(7);
  EXPECT_DOUBLE_EQ(h[ring.index(0)], 1.5);
  for (int i = 1; i < 7; ++i) EXPECT_NEAR(h[i] - h[i - 1], 0.25 * c.spins[i], 1e-15);
}

// Drift of Z at each site computed by brute force from the jump rates and the recomputed
// height after every feasible exchange, compared with D Laplacian Z + R Z.
TEST(Residual, GeneratorIdentityByBruteForce) {
  const int W = 21;
  for (double beta : {0.1, 0.25, 0.5}) {
    auto p = params(16, beta, W);
    auto k = derive_constants(p);
    auto res = residual_decomposition(p);
    Ring ring(W);
    Rng rng(20);
    for (int rep = 0; rep < 20; ++rep) {
      auto c = sample_grand_canonical(rng, W);
      auto z = z_of(c, 0, k.lambda);
      std::vector<double> drift(W, 0.0);
      for (int b = 0; b < W - 1; ++b) {  // interior bonds only
        int u = c.spins[b], v = c.spins[b + 1];
        if (u == v) continue;
        double rate = u == -1 ? k.p_at(b) : k.q_at(b);
        SpinConfig d = c;
        std::swap(d.spins[b], d.spins[b + 1]);
        long flux = b == ring.index(0) ? (u == -1 ? 1 : -1) : 0;
        auto z2 = z_of(d, flux, k.lambda);
        for (int x = 0; x < W; ++x) drift[x] += rate * (z2[x] - z[x]);
      }
      for (int x = 1; x < W - 1; ++x) {
        double lhs = drift[x] + k.nu * z[x];
        double rhs = k.diffusivity[x] * (z[x + 1] + z[x - 1] - 2 * z[x]);
        if (k.slow[x]) rhs += res.R_slow(c.spins[x], c.spins[x + 1]) * z[x];
        EXPECT_NEAR(lhs, rhs, 1e-9 * k.p_normal * z[x]) << "beta " << beta << " x " << x;
      }
    }
  }
}

TEST(Residual, NormalBondsVanishAndScaleIsPinned) {
  for (int N : {16, 64, 256, 1024, 4096})
    for (double beta : {0.1, 0.25, 0.5}) {
      auto res = residual_decomposition(params(N, beta, 33));
      EXPECT_LE(res.max_abs_normal, 1e-20 * N * N);
      EXPECT_GT(static_cast<double>(res.C_N), 0.0);
      EXPECT_LE(res.max_abs_qtilde, 1.0);
      EXPECT_GT(res.scale_ratio, 0.05);
      EXPECT_LT(res.scale_ratio, 0.2);
      // the two equal-spin patterns share the scale exactly
      EXPECT_NEAR(res.qtilde[0] + res.qtilde[3], 0.0, 1e-12);
    }
}

TEST(Residual, LiteralConventionRejected) {
  EXPECT_THROW(residual_decomposition(params(64, 0.25, 33), Diffusivity::Literal), ValidationError);
}

TEST(Residual, ZeroBetaGivesZeroScale) {
  auto res = residual_decomposition(params(64, 0.0, 33));
  EXPECT_EQ(static_cast<double>(res.C_N), 0.0);
  EXPECT_EQ(res.max_abs_qtilde, 0.0);
}

TEST(ColeHopf, FieldIsPositiveAndFinite) {
  auto k = derive_constants(params(64, 0.25, 129));
  Rng rng(21);
  RunOptions opt;
  opt.t_final = 0.5;
  opt.snapshot_dt = 0.05;
  auto res = run(init_config(InitKind::NarrowWedge, Ring(129), rng), k, opt, rng);
  auto ch = build_ch_field(res.traj, k);
  for (double z : ch.Z.data) {
    EXPECT_GT(z, 0.0);
    EXPECT_TRUE(std::isfinite(z));
  }
}

TEST(Noise, ExtractionReproducesZ) {
  auto k = derive_constants(params(16, 0.25, 33));
  Rng rng(22);
  RunOptions opt;
  opt.t_final = 0.2;
  opt.snapshot_dt = 0.01;
  auto res = run(sample_grand_canonical(rng, 33), k, opt, rng);
  auto ch = build_ch_field(res.traj, k);
  CompensatedNoise n;
  ASSERT_NO_THROW(n = extract_noise(res.log, ch));
  EXPECT_EQ(n.marks.size(), res.log.events.size());
  EXPECT_NEAR(n.mark_left, std::exp(-2 * k.lambda) - 1, 1e-15);
  // a corrupted log no longer reproduces Z
  ASSERT_FALSE(res.log.events.empty());
  auto bad = res.log;
  bad.events[0].dir = bad.events[0].dir == Dir::Left ? Dir::Right : Dir::Left;
  EXPECT_THROW(extract_noise(bad, ch), ValidationError);
}

TEST(Noise, IntegralHasMeanZero) {
  auto k = derive_constants(params(8, 0.25, 17));
  Rng rng(23);
  RunOptions opt;
  opt.t_final = 0.1;
  opt.snapshot_dt = 0.1;
  const long n = 4000;
  const int site = Ring(17).index(2);
  std::vector<double> v;
  for (long r = 0; r < n; ++r) {
    auto init = sample_grand_canonical(rng, 17);
    auto res = run(init, k, opt, rng);
    auto M = noise_integral(init, res.log, k, res.traj.times);
    v.push_back(M(1, site));
    ASSERT_EQ(M(0, site), 0.0);
  }
  EXPECT_LT(std::abs(mean(v)), 4.0 * std_error(v));
}

TEST(Noise, NoJumpsMeansNoNoise) {
  auto k = derive_constants(params(8, 0.0, 9, {}));
  auto init = SpinConfig::from_ints({1, 1, 1, 1, 1, 1, 1, 1, 1});
  EventLog log;
  auto M = noise_integral(init, log, k, {0.0, 0.5, 1.0});
  for (double v : M.data) EXPECT_EQ(v, 0.0);
}
