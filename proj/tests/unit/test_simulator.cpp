#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "slowbond/simulator.hpp"

using namespace slowbond;

namespace {

DerivedConstants constants(int N, double beta, int window, std::vector<int> slow = {0}) {
  RawParams r;
  r.N = N;
  r.beta_star = beta;
  r.window = window;
  r.slow_bonds = std::move(slow);
  return derive_constants(validate_params(r));
}

int encode(const SpinConfig& c) {
  int code = 0;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c.spins[i] == 1) code |= 1 << i;
  return code;
}

// Transition law of the exclusion process on a small ring at time t, from the full
// generator on all 2^W configurations.
Eigen::VectorXd exact_law(const DerivedConstants& k, const SpinConfig& init, double t) {
  const int W = static_cast<int>(init.size());
  const int S = 1 << W;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(S, S);
  for (int s = 0; s < S; ++s)
    for (int i = 0; i < W; ++i) {
      int j = (i + 1) % W;
      int u = (s >> i) & 1, v = (s >> j) & 1;
      if (u == v) continue;
      double rate = u == 0 ? k.p_at(i) : k.q_at(i);  // (-,+) jumps left at p
      int target = s ^ (1 << i) ^ (1 << j);
      Q(s, target) += rate;
      Q(s, s) -= rate;
    }
  Eigen::MatrixXd P = (Q * t).exp();
  return P.row(encode(init)).transpose();
}

void expect_law(const std::vector<long>& counts, long n, const Eigen::VectorXd& law) {
  for (long s = 0; s < law.size(); ++s) {
    double p = law[s];
    double emp = static_cast<double>(counts[s]) / static_cast<double>(n);
    double se = std::sqrt(std::max(p * (1 - p), 1e-6) / static_cast<double>(n));
    EXPECT_LT(std::abs(emp - p), 5.0 * se) << "state " << s;
  }
}

}  // namespace

TEST(Simulator, IncrementalRateMatchesEnumeration) {
  auto k = constants(16, 0.25, 33);
  Rng rng(1);
  for (bool asym : {true, false}) {
    Simulator sim(k, sample_grand_canonical(rng, 33), asym);
    for (int e = 0; e < 2000; ++e) {
      ASSERT_NEAR(sim.total_rate(), event_rate_total(sim.config(), k, asym), 1e-9 * sim.total_rate());
      sim.step(rng, 1e9);
    }
  }
}

TEST(Simulator, DirectSamplerMatchesExactLaw) {
  auto k = constants(4, 0.5, 5);
  auto init = SpinConfig::from_ints({1, -1, 1, -1, -1});
  const double t = 0.08;
  auto law = exact_law(k, init, t);
  Rng rng(2);
  const long n = 40000;
  std::vector<long> counts(32, 0);
  RunOptions opt;
  opt.t_final = t;
  opt.snapshot_dt = t;
  opt.record_log = false;
  for (long r = 0; r < n; ++r) counts[encode(run(init, k, opt, rng).traj.spins.back())]++;
  expect_law(counts, n, law);
}

TEST(Simulator, GraphicalSamplerMatchesExactLaw) {
  auto k = constants(4, 0.5, 5);
  auto init = SpinConfig::from_ints({-1, -1, 1, 1, -1});
  const double t = 0.08;
  auto law = exact_law(k, init, t);
  Rng rng(3);
  const long n = 40000;
  std::vector<long> counts(32, 0);
  RunOptions opt;
  opt.t_final = t;
  opt.snapshot_dt = t;
  opt.record_log = false;
  opt.sampler = Sampler::Graphical;
  for (long r = 0; r < n; ++r) counts[encode(run(init, k, opt, rng).traj.spins.back())]++;
  expect_law(counts, n, law);
}

TEST(Simulator, FirstEventTimeIsExponential) {
  auto k = constants(8, 0.1, 9);
  auto init = SpinConfig::from_ints({1, 1, 1, 1, -1, -1, -1, -1, -1});
  double total = event_rate_total(init, k);
  Rng rng(4);
  const long n = 100000;
  double acc = 0.0;
  for (long r = 0; r < n; ++r) {
    Simulator sim(k, init);
    auto e = sim.step(rng, 1e9);
    ASSERT_TRUE(e.has_value());
    acc += e->time;
  }
  double m = acc / n;
  EXPECT_NEAR(m * total, 1.0, 5.0 / std::sqrt(double(n)));
}

TEST(Simulator, ReplayReproducesSnapshots) {
  auto k = constants(16, 0.25, 33);
  Rng rng(5);
  RunOptions opt;
  opt.t_final = 0.2;
  opt.snapshot_dt = 0.01;
  for (auto sampler : {Sampler::Direct, Sampler::Graphical}) {
    opt.sampler = sampler;
    auto init = sample_grand_canonical(rng, 33);
    auto res = run(init, k, opt, rng);
    auto again = replay(init, res.log, k, res.traj.times);
    ASSERT_EQ(again.spins.size(), res.traj.spins.size());
    for (std::size_t t = 0; t < again.spins.size(); ++t) {
      EXPECT_EQ(again.spins[t], res.traj.spins[t]);
      EXPECT_EQ(again.flux[t], res.traj.flux[t]);
    }
    EXPECT_EQ(static_cast<long>(res.log.events.size()), res.n_events);
  }
}

TEST(Simulator, FluxCountsExchangesAcrossOrigin) {
  auto k = constants(16, 0.1, 33);
  Rng rng(6);
  RunOptions opt;
  opt.t_final = 0.3;
  opt.snapshot_dt = 0.3;
  auto res = run(sample_grand_canonical(rng, 33), k, opt, rng);
  long net = 0;
  for (const auto& e : res.log.events)
    if (e.bond == Ring(33).index(0)) net += e.dir == Dir::Left ? 1 : -1;
  EXPECT_EQ(res.traj.flux.back(), net);
  EXPECT_EQ(res.traj.flux.front(), 0);
}

TEST(Simulator, SameSeedSameRun) {
  auto k = constants(16, 0.1, 33);
  RunOptions opt;
  opt.t_final = 0.1;
  Rng a(7), b(7);
  auto init = init_config(InitKind::NarrowWedge, Ring(33), a);
  init_config(InitKind::NarrowWedge, Ring(33), b);
  auto r1 = run(init, k, opt, a);
  auto r2 = run(init, k, opt, b);
  EXPECT_EQ(r1.log.events, r2.log.events);
}

TEST(Simulator, SpinCountConserved) {
  auto k = constants(16, 0.25, 33);
  Rng rng(8);
  RunOptions opt;
  opt.t_final = 0.5;
  opt.snapshot_dt = 0.05;
  auto res = run(sample_grand_canonical(rng, 33), k, opt, rng);
  for (const auto& c : res.traj.spins) EXPECT_EQ(c.total(), res.initial.total());
}

TEST(Simulator, InfeasibleExchangeRejected) {
  auto k = constants(4, 0.0, 5, {});
  Simulator sim(k, SpinConfig::from_ints({1, 1, -1, -1, 1}));
  EXPECT_THROW(sim.apply(0, Dir::Left), ValidationError);
  EXPECT_NO_THROW(sim.apply(1, Dir::Right));
}

TEST(Simulator, TruncationIsFlagged) {
  auto k = constants(16, 0.0, 33, {});
  Rng rng(9);
  RunOptions opt;
  opt.t_final = 1.0;
  opt.max_events = 10;
  auto res = run(sample_grand_canonical(rng, 33), k, opt, rng);
  EXPECT_TRUE(res.log.truncated);
  EXPECT_LT(res.traj.spins.size(), snapshot_grid(1.0, 0.1).size());
}

TEST(Init, NarrowWedgeAndExplicit) {
  Ring ring(9);
  Rng rng(10);
  auto c = init_config(InitKind::NarrowWedge, ring, rng);
  for (int i = 0; i < 9; ++i) EXPECT_EQ(c.spins[i], ring.site(i) >= 0 ? 1 : -1);
  EXPECT_THROW(init_config(InitKind::Explicit, ring, rng, {1, -1}), ValidationError);
  EXPECT_THROW(init_kind_from_string("flat"), ValidationError);
}

TEST(Grid, SnapshotGrid) {
  auto g = snapshot_grid(1.0, 0.1);
  ASSERT_EQ(g.size(), 11u);
  EXPECT_NEAR(g.back(), 1.0, 1e-12);
  EXPECT_THROW(snapshot_grid(0.0, 0.1), ValidationError);
}

TEST(Audit, CountsPerBlock) {
  EventLog log;
  log.horizon = 1.0;
  // N = 4: 16 blocks of length 1/16
  for (int i = 0; i < 5; ++i) log.events.push_back({0.01 + 0.001 * i, 3, Dir::Left});
  log.events.push_back({0.5, 3, Dir::Left});
  auto a = jump_size_audit(log, 4, 9);
  EXPECT_EQ(a.max_block_count, 5);
  EXPECT_EQ(a.blocks, 16);
  EXPECT_NEAR(a.cap, 10.0 * std::log(4.0), 1e-12);
}
