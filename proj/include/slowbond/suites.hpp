#ifndef SLOWBOND_SUITES_HPP
#define SLOWBOND_SUITES_HPP

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "slowbond/blocks.hpp"
#include "slowbond/comparison.hpp"
#include "slowbond/gartner.hpp"
#include "slowbond/harness.hpp"
#include "slowbond/heat_kernel.hpp"
#include "slowbond/io.hpp"
#include "slowbond/model.hpp"
#include "slowbond/simulator.hpp"

namespace slowbond {

/// What a verification suite may take from the run config. Empty lists and zeros mean
/// the suite's own defaults, which are the acceptance sizes.
struct SuiteSettings {
  std::vector<int> Ns;
  std::vector<double> betas;
  long replicas = 0;
  int window = 0;
  std::uint64_t seed = 1;
  int workers = 1;
  Diffusivity convention = Diffusivity::Matched;
  double eps = 0.01;
  double delta = 0.01;

  std::vector<int> N_or(std::vector<int> d) const { return Ns.empty() ? d : Ns; }
  std::vector<double> beta_or(std::vector<double> d) const { return betas.empty() ? d : betas; }
  long replicas_or(long d) const { return replicas > 0 ? replicas : d; }
  int window_or(int d) const { return window > 0 ? window : d; }
};

inline SuiteSettings settings_from(const RunConfig& c) {
  SuiteSettings s;
  s.Ns = c.sweep_N;
  s.betas = c.sweep_beta;
  s.replicas = c.sweep_replicas;
  s.window = c.sweep_window;
  s.seed = c.seed;
  s.workers = c.workers;
  s.convention = diffusivity_from_string(c.convention);
  s.eps = c.eps;
  s.delta = c.delta;
  return s;
}

namespace detail {

inline std::string num(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", v);
  return b;
}

inline ModelParams make_params(int N, double beta, int window, std::vector<int> slow = {0},
                               double eps_star2 = 0.0) {
  RawParams r;
  r.N = N;
  r.beta_star = beta;
  r.window = window;
  r.slow_bonds = std::move(slow);
  r.eps_star2 = eps_star2;
  return validate_params(r);
}

inline Row info_row(std::string name, int N, double beta, double value, double se = 0.0) {
  return make_row(std::move(name), N, beta, value, INFINITY, se);
}

/// Row for a two-sided tolerance: value is |measured - target|.
inline Row deviation_row(std::string name, int N, double beta, double measured, double target, double tol) {
  return make_row(std::move(name), N, beta, std::abs(measured - target), tol);
}

inline void seeds_for(SuiteOutput& out, std::uint64_t master, long replicas) {
  for (long i = 0; i < replicas; ++i) out.seeds.push_back(split_seed(master, static_cast<std::uint64_t>(i)));
}

inline std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s + "]";
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// Exact four-case residual over an N sweep.
inline SuiteOutput suite_residual(const SuiteSettings& s) {
  SuiteOutput out;
  out.suite = "residual";
  auto Ns = s.N_or({16, 64, 256, 1024, 4096});
  auto betas = s.beta_or({0.1, 0.25, 0.5});
  Csv csv({"N", "beta_star", "u", "v", "R", "Q_emp", "qtilde_emp"});
  bool normal_ok = true;
  double qmax = 0.0;
  bool ratio_ok = true;
  std::string ratio_detail;
  const double q_bound = 1.0;
  for (double b : betas) {
    std::vector<double> ratios;
    for (int N : Ns) {
      auto p = detail::make_params(N, b, 33);
      ResidualDecomposition r;
      try {
        r = residual_decomposition(p, s.convention);
      } catch (const ValidationError&) {
        normal_ok = false;
        continue;
      }
      for (int k = 0; k < 4; ++k) {
        auto pat = ResidualDecomposition::patterns[k];
        csv.row(N, b, pat[0], pat[1], static_cast<double>(r.slow[k]), r.Q_emp[k], r.qtilde[k]);
      }
      double normal = r.max_abs_normal / (double(N) * N);
      out.rows.push_back(make_row("residual_normal_max_over_N2", N, b, normal, 1e-20));
      normal_ok = normal_ok && normal <= 1e-20;
      out.rows.push_back(make_row("qtilde_max_abs", N, b, r.max_abs_qtilde, q_bound));
      qmax = std::max(qmax, r.max_abs_qtilde);
      out.rows.push_back(detail::info_row("c_N", N, b, static_cast<double>(r.C_N)));
      if (b > 0) {
        out.rows.push_back(detail::info_row("c_N_scale_ratio", N, b, r.scale_ratio));
        ratios.push_back(r.scale_ratio);
      }
    }
    if (!ratios.empty()) {
      double hi = *std::max_element(ratios.begin(), ratios.end());
      double lo = *std::min_element(ratios.begin(), ratios.end());
      double spread = (hi - lo) / (hi + lo);  // every value within this fraction of (hi + lo) / 2
      ratio_ok = ratio_ok && spread <= 0.2;
      ratio_detail += " beta=" + detail::num(b) + ":" + detail::num(spread);
    }
  }
  out.files.emplace("residual.csv", csv);
  out.checks.push_back({"residual_normal_vanishes", normal_ok, "max |R_normal| / N^2 <= 1e-20"});
  out.checks.push_back({"qtilde_bounded", qmax <= q_bound,
                        "max |qtilde| = " + detail::num(qmax) + " <= " + detail::num(q_bound)});
  out.checks.push_back({"c_N_scale_constant", ratio_ok, "relative spread of C_N/(N-N^{1-beta}) <= 0.2:" + ratio_detail});
  return out;
}

/// Conservation, positivity and the semigroup law on random instances.
inline SuiteOutput suite_kernel(const SuiteSettings& s) {
  SuiteOutput out;
  out.suite = "kernel";
  const long instances = s.replicas_or(50);
  Rng rng(split_seed(s.seed, 0));
  out.seeds.push_back(split_seed(s.seed, 0));
  Csv kcsv({"S", "T", "x", "y", "P", "Pbar"});
  double worst_row = 0.0, worst_min = INFINITY, worst_ck = 0.0, worst_mass = 0.0;
  for (long i = 0; i < instances; ++i) {
    int N = s.Ns.empty() ? 4 + static_cast<int>(rng.below(61)) : s.Ns[rng.below(s.Ns.size())];
    double beta = s.betas.empty() ? 0.3 * rng.uniform() : s.betas[rng.below(s.betas.size())];
    int W = s.window_or(2 * N + 1);
    int nslow = 1 + static_cast<int>(rng.below(3));
    Ring ring(W);
    std::vector<int> slow;
    for (int j = 0; j < nslow; ++j) slow.push_back(ring.site(static_cast<int>(rng.below(W))));
    std::sort(slow.begin(), slow.end());
    slow.erase(std::unique(slow.begin(), slow.end()), slow.end());
    auto p = detail::make_params(N, beta, W, slow, 1.0);
    auto k = derive_constants(p, s.convention);
    double t1 = 0.005 + 0.095 * rng.uniform(), t2 = 0.005 + 0.095 * rng.uniform();
    double S = rng.uniform();
    auto P1 = solve_kernel(k, S, S + t1);
    auto P2 = solve_kernel(k, S + t1, S + t1 + t2);
    auto P12 = solve_kernel(k, S, S + t1 + t2);
    double row = std::max({max_row_sum_deviation(P1.P), max_row_sum_deviation(P2.P), max_row_sum_deviation(P12.P)});
    double mn = std::min({P1.P.minCoeff(), P2.P.minCoeff(), P12.P.minCoeff()});
    double ck = (P1.P * P2.P - P12.P).cwiseAbs().maxCoeff();
    // the measure 1/D is invariant: its column-weighted mass is conserved
    Eigen::VectorXd w0(W);
    for (int x = 0; x < W; ++x) w0[x] = 1.0 / k.diffusivity[x];
    double mass = (weighted_column_mass(P12.P, k.diffusivity) - w0).cwiseAbs().maxCoeff() / w0.maxCoeff();
    worst_row = std::max(worst_row, row);
    worst_min = std::min(worst_min, mn);
    worst_ck = std::max(worst_ck, ck);
    worst_mass = std::max(worst_mass, mass);
    out.rows.push_back(make_row("kernel_row_sum_dev", N, beta, row, 1e-12));
    out.rows.push_back(make_row("kernel_neg_min_entry", N, beta, -mn, 0.0));
    out.rows.push_back(make_row("kernel_chapman_kolmogorov", N, beta, ck, 1e-10));
    out.rows.push_back(make_row("kernel_invariant_measure_dev", N, beta, mass, 1e-10));
    if (i == 0) {
      auto Pbar = homogeneous_kernel(k, S, S + t1 + t2);
      for (int x = 0; x < W; ++x)
        for (int y = 0; y < W; ++y)
          kcsv.row(S, S + t1 + t2, ring.site(x), ring.site(y), P12.P(x, y), Pbar.P(x, y));
    }
  }
  out.files.emplace("kernel.csv", kcsv);
  out.checks.push_back({"kernel_row_sums", worst_row < 1e-12, "max deviation " + detail::num(worst_row)});
  out.checks.push_back({"kernel_nonnegative", worst_min >= 0.0, "min entry " + detail::num(worst_min)});
  out.checks.push_back({"kernel_chapman_kolmogorov", worst_ck < 1e-10, "max residual " + detail::num(worst_ck)});
  out.checks.push_back({"kernel_invariant_measure", worst_mass < 1e-10, "max deviation " + detail::num(worst_mass)});
  return out;
}

/// Three independent constructions of the kernel, and a Monte Carlo walk.
inline SuiteOutput suite_oracle(const SuiteSettings& s) {
  SuiteOutput out;
  out.suite = "oracle";
  struct Case {
    int N, W;
    double beta, t;
  };
  std::vector<Case> cases{{8, 65, 0.0, 0.05}, {16, 33, 0.0, 0.02}, {8, 17, 0.0, 0.5},
                          {8, 65, 0.25, 0.05}, {16, 65, 0.1, 0.1}};
  double worst = 0.0;
  for (const auto& c : cases) {
    auto k = derive_constants(detail::make_params(c.N, c.beta, c.W), s.convention);
    auto U = solve_kernel(k, 0.0, c.t, KernelMethod::Uniformization);
    auto E = solve_kernel(k, 0.0, c.t, KernelMethod::Expm);
    double ue = (U.P - E.P).cwiseAbs().maxCoeff();
    out.rows.push_back(make_row("oracle_uniformization_vs_expm", c.N, c.beta, ue, 1e-10));
    worst = std::max(worst, ue);
    if (c.beta == 0.0) {
      auto B = homogeneous_kernel(k, 0.0, c.t);
      double ub = (U.P - B.P).cwiseAbs().maxCoeff(), eb = (E.P - B.P).cwiseAbs().maxCoeff();
      out.rows.push_back(make_row("oracle_uniformization_vs_bessel", c.N, c.beta, ub, 1e-10));
      out.rows.push_back(make_row("oracle_expm_vs_bessel", c.N, c.beta, eb, 1e-10));
      worst = std::max({worst, ub, eb});
    }
  }
  out.checks.push_back({"oracle_kernels_agree", worst < 1e-10, "max entry difference " + detail::num(worst)});

  const long replicas = s.replicas_or(100000);
  std::vector<Case> walks{{8, 33, 0.25, 0.05}, {8, 17, 0.0, 0.2}};
  bool tv_ok = true;
  std::string detail_tv;
  for (std::size_t w = 0; w < walks.size(); ++w) {
    const auto& c = walks[w];
    auto k = derive_constants(detail::make_params(c.N, c.beta, c.W), s.convention);
    Rng rng(split_seed(s.seed, w));
    out.seeds.push_back(split_seed(s.seed, w));
    auto g = inhomogeneous_generator(k);
    int x0 = Ring(c.W).index(0);
    auto sample = random_walk_oracle(g, rng, replicas, c.t, x0);
    auto P = solve_kernel(g, 0.0, c.t);
    Eigen::VectorXd row = P.P.row(x0).transpose();
    double tv = total_variation(sample.distribution, row);
    double bound = 3.0 * std::sqrt(static_cast<double>(c.W) / static_cast<double>(replicas));
    out.rows.push_back(make_row("oracle_walk_total_variation", c.N, c.beta, tv, bound));
    tv_ok = tv_ok && tv < bound;
    detail_tv += " " + detail::num(tv) + "<" + detail::num(bound);
  }
  out.checks.push_back({"oracle_walk_tv", tv_ok, "TV vs 3 sqrt(W/replicas):" + detail_tv});
  return out;
}

/// Duhamel identity between the two kernels, with a midpoint-rule convergence check.
inline SuiteOutput suite_duhamel(const SuiteSettings& s) {
  SuiteOutput out;
  out.suite = "duhamel";
  int N = s.N_or({8}).front();
  double beta = s.beta_or({0.25}).front();
  int W = s.window_or(65);
  const double T = 0.05;
  auto k = derive_constants(detail::make_params(N, beta, W), s.convention);
  auto P = solve_kernel(k, 0.0, T);
  auto Pbar = homogeneous_kernel(k, 0.0, T);
  auto fine = duhamel_residual(P, Pbar, k, 1e-5 * T);
  auto coarse = duhamel_residual(P, Pbar, k, T / 50);
  auto half = duhamel_residual(P, Pbar, k, T / 100);
  double ratio = coarse.residual / half.residual;
  out.rows.push_back(make_row("duhamel_residual", N, beta, fine.residual, 1e-6));
  out.rows.push_back(detail::info_row("duhamel_residual_n50", N, beta, coarse.residual));
  out.rows.push_back(detail::info_row("duhamel_residual_n100", N, beta, half.residual));
  out.rows.push_back(detail::deviation_row("duhamel_halving_ratio_dev", N, beta, ratio, 4.0, 0.5));
  out.checks.push_back({"duhamel_residual", fine.residual < 1e-6,
                        "residual " + detail::num(fine.residual) + " with " + std::to_string(fine.nodes) + " nodes"});
  out.checks.push_back({"duhamel_convergence", ratio >= 3.5 && ratio <= 4.5, "halving ratio " + detail::num(ratio)});
  return out;
}

/// On-diagonal decay of the inhomogeneous kernel.
inline SuiteOutput suite_nash(const SuiteSettings& s) {
  SuiteOutput out;
  out.suite = "nash";
  bool ok = true;
  std::string d;
  for (double beta : s.beta_or({0.0, 0.1, 0.25}))
    for (int N : s.N_or({16, 32, 64})) {
      int W = s.window_or(wrap_safe_window(N, 1.0));
      auto k = derive_constants(detail::make_params(N, beta, W), s.convention);
      auto rep = nash_on_diagonal_fit(k);
      out.rows.push_back(detail::info_row("nash_slope", N, beta, rep.exponent));
      out.rows.push_back(detail::deviation_row("nash_slope_dev", N, beta, rep.exponent, -0.5, 0.1));
      out.rows.push_back(make_row("nash_prefactor", N, beta, rep.constant, 1.0));
      out.rows.push_back(make_row("nash_inconclusive", N, beta, rep.inconclusive ? 1.0 : 0.0, 0.0));
      ok = ok && rep.pass;
      d += " (" + std::to_string(N) + "," + detail::num(beta) + "): " + detail::num(rep.exponent) + "/" +
           detail::num(rep.constant);
    }
  out.checks.push_back({"nash_slope_and_prefactor", ok, "slope/prefactor" + d});
  return out;
}

/// Gap between inhomogeneous and homogeneous kernels off the defect neighbourhood.
inline SuiteOutput suite_gap(const SuiteSettings& s) {
  SuiteOutput out;
  out.suite = "gap";
  const double t = 0.25;
  std::vector<double> scaled;
  bool maxp = true;
  auto Ns = s.N_or({32, 64, 128});
  double beta = s.beta_or({0.1}).front();
  for (int N : Ns) {
    int W = s.window_or(wrap_safe_window(N, t));
    auto p = detail::make_params(N, beta, W);
    auto k = derive_constants(p, s.convention);
    auto sched = build_schedule(p, s.eps, s.delta);
    auto g = inhomogeneous_generator(k);
    auto P4 = solve_kernel(g, 0.0, t / 4), P2 = solve_kernel(g, 0.0, t / 2), P = solve_kernel(g, 0.0, t);
    auto B4 = homogeneous_kernel(k, 0.0, t / 4), B2 = homogeneous_kernel(k, 0.0, t / 2),
         B = homogeneous_kernel(k, 0.0, t);
    auto gap = perturbative_gap(P, B, p, sched);
    auto m1 = max_principle_check({&P4.P, &P2.P, &P.P});
    auto m2 = max_principle_check({&B4.P, &B2.P, &B.P});
    maxp = maxp && m1.pass && m2.pass;
    scaled.push_back(gap.sup_outside * N);
    out.rows.push_back(detail::info_row("gap_sup_outside_times_N", N, beta, gap.sup_outside * N));
    out.rows.push_back(detail::info_row("gap_sup_all_times_N", N, beta, gap.sup_all * N));
    for (std::size_t q = 0; q < gap.kappas.size(); ++q)
      out.rows.push_back(detail::info_row("gap_weighted_outside_kappa" + detail::num(gap.kappas[q]) + "_times_N",
                                          N, beta, gap.weighted_outside[q] * N));
    out.rows.push_back(make_row("max_principle_violation", N, beta, (m1.pass && m2.pass) ? 0.0 : 1.0, 0.0));
  }
  out.checks.push_back({"gap_decreasing", strictly_decreasing(scaled), "N sup|P-Pbar| = " + detail::list(scaled)});
  out.checks.push_back({"max_principle", maxp, "entries in [0,1], sup non-increasing in t"});
  return out;
}

inline SuiteOutput suite_sobolev(const SuiteSettings& s) {
  SuiteOutput out;
  out.suite = "sobolev";
  Rng rng(split_seed(s.seed, 0));
  out.seeds.push_back(split_seed(s.seed, 0));
  int N = s.N_or({16}).front();
  auto rep = nash_sobolev_check(rng, static_cast<int>(s.replicas_or(1000)), {10, 100, 1000}, N);
  for (std::size_t i = 0; i < rep.supports.size(); ++i)
    out.rows.push_back(detail::info_row("nash_sobolev_max_ratio_support" + std::to_string(rep.supports[i]), N, 0.0,
                                        rep.max_ratio[i]));
  out.rows.push_back(make_row("nash_sobolev_spread", N, 0.0, rep.spread, 2.0));
  out.checks.push_back({"nash_sobolev_stable", std::isfinite(rep.spread) && rep.spread < 2.0,
                        "max ratios " + detail::list(rep.max_ratio) + ", spread " + detail::num(rep.spread)});
  return out;
}

inline SuiteOutput suite_azuma(const SuiteSettings& s) {
  SuiteOutput out;
  out.suite = "azuma";
  Rng rng(split_seed(s.seed, 0));
  out.seeds.push_back(split_seed(s.seed, 0));
  std::vector<long> ells{16, 32, 64, 128, 256, 512, 1024};
  std::vector<double> rhos{-0.5, 0.0, 0.5};
  auto rep = azuma_canonical_check(rng, ells, rhos, s.replicas_or(10000));
  Csv csv({"replica", "time", "field_name", "anchor", "value"});
  for (std::size_t r = 0; r < rhos.size(); ++r) {
    for (std::size_t l = 0; l < ells.size(); ++l)
      out.rows.push_back(detail::info_row("azuma_mean_rho" + detail::num(rhos[r]) + "_l" + std::to_string(ells[l]), 0,
                                          0.0, rep.means[r][l], rep.stderrs[r][l]));
    out.rows.push_back(detail::info_row("azuma_slope_rho" + detail::num(rhos[r]), 0, 0.0, rep.slopes[r]));
    out.rows.push_back(detail::deviation_row("azuma_slope_dev_rho" + detail::num(rhos[r]), 0, 0.0, rep.slopes[r], -0.5, 0.1));
  }
  out.checks.push_back({"azuma_exponent", rep.pass, "slopes " + detail::list(rep.slopes)});
  return out;
}

/// Mean-zero compensated noise integral, and collapse of (Z, Y, X) without slow bonds.
inline SuiteOutput suite_martingale(const SuiteSettings& s) {
  SuiteOutput out;
  out.suite = "martingale";
  int N = s.N_or({32}).front();
  double beta = s.beta_or({0.1}).front();
  int W = s.window_or(2 * N + 1);
  auto p = detail::make_params(N, beta, W);
  auto k = derive_constants(p, s.convention);
  RunOptions opt;
  opt.t_final = 0.1;
  opt.snapshot_dt = 0.025;
  auto times = snapshot_grid(opt.t_final, opt.snapshot_dt);
  Ring ring(W);
  std::vector<int> probe_sites{-8, -4, 0, 4, 8};
  const long R = s.replicas_or(10000);
  auto vals = orchestrate_ensemble(R, s.seed, s.workers, [&](long, Rng& rng) {
    auto init = init_config(InitKind::BernoulliHalf, ring, rng, {});
    auto res = run(init, k, opt, rng);
    auto M = noise_integral(init, res.log, k, times);
    std::vector<double> v;
    for (std::size_t t = 1; t < times.size(); ++t)
      for (int x : probe_sites) v.push_back(M(t, ring.index(x)));
    return v;
  });
  detail::seeds_for(out, s.seed, R);
  bool ok = true;
  double worst_z = 0.0;
  std::size_t probe = 0;
  for (std::size_t t = 1; t < times.size(); ++t)
    for (int x : probe_sites) {
      std::vector<double> col;
      for (const auto& v : vals) col.push_back(v[probe]);
      double m = mean(col), se = std_error(col);
      double z = se > 0 ? std::abs(m) / se : 0.0;
      worst_z = std::max(worst_z, z);
      ok = ok && std::abs(m) <= 3.0 * se;
      out.rows.push_back(make_row("noise_integral_mean_t" + detail::num(times[t]) + "_x" + std::to_string(x), N, beta,
                                  std::abs(m), 3.0 * se, se));
      ++probe;
    }
  out.checks.push_back({"martingale_mean_zero", ok, "max |mean|/stderr over 20 probes " + detail::num(worst_z)});

  // beta = 0: the three fields coincide
  auto p0 = detail::make_params(N, 0.0, W);
  auto k0 = derive_constants(p0, s.convention);
  const long R0 = 16;
  const std::uint64_t seed0 = split_seed(s.seed, 1'000'000'007ULL);
  auto gaps = orchestrate_ensemble(R0, seed0, s.workers, [&](long, Rng& rng) {
    auto init = init_config(InitKind::BernoulliHalf, ring, rng, {});
    auto res = run(init, k0, opt, rng);
    auto ch = build_ch_field(res.traj, k0);
    auto aux = solve_aux_fields(init, res.log, k0, res.traj.times);
    return std::max({max_relative_gap(ch.Z, aux.Y), max_relative_gap(aux.Y, aux.X), max_relative_gap(ch.Z, aux.X)});
  });
  double worst = *std::max_element(gaps.begin(), gaps.end());
  out.rows.push_back(make_row("beta0_max_relative_gap_ZYX", N, 0.0, worst, 1e-6));
  out.checks.push_back({"beta0_collapse", worst < 1e-6, "max relative pairwise gap " + detail::num(worst)});

  // step halving of the auxiliary solver on one replica at the configured beta
  Rng rng(split_seed(seed0, 1'000'000ULL));
  auto init = init_config(InitKind::BernoulliHalf, ring, rng, {});
  auto res = run(init, k, opt, rng);
  double change = aux_substep_change(init, res.log, k, res.traj.times, 1e-4);
  out.rows.push_back(make_row("aux_substep_halving_change", N, beta, change, 1e-8));
  return out;
}

/// Per-replica gaps between Z and the auxiliary fields over an N sweep.
inline SuiteOutput suite_pathwise(const SuiteSettings& s) {
  SuiteOutput out;
  out.suite = "pathwise";
  auto Ns = s.N_or({16, 32, 64});
  double beta = s.beta_or({0.1}).front();
  const long R = s.replicas_or(1000);
  const double kappa = 1.0;
  std::vector<double> m1, m2;
  detail::seeds_for(out, s.seed, R);
  for (int N : Ns) {
    int W = s.window_or(4 * N + 1);
    auto p = detail::make_params(N, beta, W);
    auto k = derive_constants(p, s.convention);
    Ring ring(W);
    RunOptions opt;
    opt.t_final = 0.25;
    opt.snapshot_dt = 0.0125;
    auto norms = orchestrate_ensemble(R, s.seed, s.workers, [&](long, Rng& rng) {
      auto init = init_config(InitKind::BernoulliHalf, ring, rng, {});
      auto res = run(init, k, opt, rng);
      auto ch = build_ch_field(res.traj, k);
      auto aux = solve_aux_fields(init, res.log, k, res.traj.times);
      return pathwise_gaps(ch.Z, aux, N, kappa);
    });
    std::vector<double> a, b, y, x, z;
    for (const auto& g : norms) {
      a.push_back(g.phi1);
      b.push_back(g.phi2);
      y.push_back(g.Y);
      x.push_back(g.X);
      z.push_back(g.Z);
    }
    m1.push_back(median(a));
    m2.push_back(median(b));
    out.rows.push_back(detail::info_row("median_phi1", N, beta, median(a)));
    out.rows.push_back(detail::info_row("median_phi2", N, beta, median(b)));
    out.rows.push_back(detail::info_row("median_Y", N, beta, median(y)));
    out.rows.push_back(detail::info_row("median_X", N, beta, median(x)));
    out.rows.push_back(detail::info_row("median_Z", N, beta, median(z)));
  }
  out.checks.push_back({"pathwise_phi1_nonincreasing", nonincreasing(m1), "medians " + detail::list(m1)});
  out.checks.push_back({"pathwise_phi2_nonincreasing", nonincreasing(m2), "medians " + detail::list(m2)});
  return out;
}

/// Continuum reference and distributional comparison of log Z at the slow bond.
inline SuiteOutput suite_kpz(const SuiteSettings& s) {
  SuiteOutput out;
  out.suite = "kpz";
  const long R = s.replicas_or(1000);
  const double T = 0.5;
  detail::seeds_for(out, s.seed, R);

  // (i) SHE ensemble mean against the noiseless solver on the same mesh
  SHEMesh mesh;
  const double sigma = 0.5;
  const std::uint64_t she_seed = split_seed(s.seed, 2'000'000'011ULL);
  auto she = orchestrate_ensemble(R, she_seed, s.workers, [&](long, Rng& rng) {
    return she_solve(SHEInit::Delta, T, mesh, &rng, sigma);
  });
  auto flow = she_solve(SHEInit::Delta, T, mesh, nullptr, sigma);
  bool mean_ok = true;
  double worst = 0.0;
  for (int j = 0; j < 20; ++j) {
    double xp = -1.9 + 0.2 * j;
    std::vector<double> v;
    for (const auto& g : she) v.push_back(g.at(xp));
    double m = mean(v), se = std_error(v), ref = flow.at(xp);
    worst = std::max(worst, std::abs(m - ref) / se);
    mean_ok = mean_ok && std::abs(m - ref) <= 3.0 * se;
    out.rows.push_back(make_row("she_mean_dev_x" + detail::num(xp), 0, 0.0, std::abs(m - ref), 3.0 * se, se));
  }
  bool positive = std::all_of(she.begin(), she.end(), [](const SHEGrid& g) { return g.positive; });
  out.rows.push_back(make_row("she_nonpositive_runs", 0, 0.0, positive ? 0.0 : 1.0, 0.0));
  out.checks.push_back({"she_mean_matches_heat_flow", mean_ok, "max |mean - flow|/stderr over 20 probes " + detail::num(worst)});
  std::vector<double> she_log;
  for (const auto& g : she) she_log.push_back(std::log(g.at(0.0)));

  // (ii) microscopic ensembles with common random numbers across beta
  auto Ns = s.N_or({32, 64, 128});
  auto betas = s.beta_or({0.0, 0.1});
  std::map<std::pair<int, double>, std::vector<double>> micro;
  for (int N : Ns)
    for (double beta : betas) {
      int W = s.window_or(8 * N + 1);
      auto p = detail::make_params(N, beta, W);
      auto k = derive_constants(p, s.convention);
      Ring ring(W);
      RunOptions opt;
      opt.t_final = T;
      opt.snapshot_dt = T;
      opt.record_log = false;
      opt.sampler = Sampler::Graphical;
      micro[{N, beta}] = orchestrate_ensemble(R, s.seed, s.workers, [&](long, Rng& rng) {
        auto init = init_config(InitKind::NarrowWedge, ring, rng, {});
        auto res = run(init, k, opt, rng);
        auto ch = build_ch_field(res.traj, k);
        return micro_log_z(ch.Z, 1, ring.index(0), N, Normalization::UnitMass, InitKind::NarrowWedge);
      });
    }
  auto rows = kpz_distribution_compare(micro, she_log, T, 0.0);
  Csv csv({"N", "beta_star", "T", "x", "statistic", "value", "stderr"});
  for (const auto& r : rows) csv.row(r.N, r.beta_star, r.T, r.x, r.statistic, r.value, r.stderr_);
  csv.row(0, 0.0, T, 0.0, std::string("she_mean_log_z"), mean(she_log), std_error(she_log));
  out.files.emplace("compare.csv", csv);

  bool trend_ok = true;
  std::string d;
  for (double beta : betas) {
    if (beta == 0.0) continue;
    std::vector<double> ks;
    for (int N : Ns) {
      double v = ks_statistic(micro[{N, 0.0}], micro[{N, beta}]);
      ks.push_back(v);
      out.rows.push_back(detail::info_row("ks_beta0_vs_beta", N, beta, v));
    }
    trend_ok = trend_ok && strictly_decreasing(ks);
    d += " beta=" + detail::num(beta) + ": " + detail::list(ks);
  }
  out.checks.push_back({"ks_decreasing_in_N", trend_ok, "KS distances" + d});
  return out;
}

/// Error fields of the mild equation and their bounds.
inline SuiteOutput suite_blocks(const SuiteSettings& s) {
  SuiteOutput out;
  out.suite = "blocks";
  auto Ns = s.N_or({16, 32, 64});
  double beta = s.beta_or({0.1}).front();
  const long R = s.replicas_or(100);
  const double kappa = 1.0;
  detail::seeds_for(out, s.seed, R);
  Csv csv({"replica", "time", "field_name", "anchor", "value"});
  std::vector<double> med_ratio, viol;
  double telescope = 0.0;
  for (int N : Ns) {
    int W = s.window_or(4 * N + 1);
    auto p = detail::make_params(N, beta, W);
    auto k = derive_constants(p, s.convention);
    auto sched = build_schedule(p, s.eps, s.delta);
    auto res = residual_decomposition(p, s.convention);
    Ring ring(W);
    RunOptions opt;
    opt.t_final = 0.1;
    opt.snapshot_dt = 0.002;
    auto times = snapshot_grid(opt.t_final, opt.snapshot_dt);
    std::vector<int> sites;
    for (int b : p.slow_bonds) sites.push_back(ring.index(b));
    auto table = kernel_table(inhomogeneous_generator(k), sites, opt.snapshot_dt, times.size());
    struct Out {
      std::vector<double> norms;  // per piece, kappa-weighted sup
      double z = 0.0, tele = 0.0;
    };
    auto per = orchestrate_ensemble(R, s.seed, s.workers, [&](long, Rng& rng) {
      auto init = init_config(InitKind::BernoulliHalf, ring, rng, {});
      auto run_out = run(init, k, opt, rng);
      auto ch = build_ch_field(run_out.traj, k);
      auto f = error_fields(ch, run_out.traj, table, sched, res, p);
      Out o;
      for (int q = 0; q < kPieceCount; ++q) o.norms.push_back(weighted_sup_norm(f[q], N, kappa));
      o.z = weighted_sup_norm(ch.Z, N, kappa);
      for (std::size_t t = 0; t < f[kE_I].data.size(); ++t)
        o.tele = std::max(o.tele, std::abs(f[kE_I].data[t] - f[kE_I1].data[t] - f[kE_I3].data[t] -
                                           f[kE_I4].data[t]));
      return o;
    });
    std::vector<double> e1, e2, z, ratio;
    for (std::size_t r = 0; r < per.size(); ++r) {
      e1.push_back(per[r].norms[kE_I]);
      e2.push_back(per[r].norms[kE_II]);
      z.push_back(per[r].z);
      ratio.push_back(per[r].norms[kE_I] / per[r].z);
      telescope = std::max(telescope, per[r].tele);
      if (N == Ns.front() && r < 10)
        for (int q = 0; q < kPieceCount; ++q)
          csv.row(static_cast<long>(r), opt.t_final, std::string(piece_name(q)), p.slow_bonds.front(), per[r].norms[q]);
    }
    auto bound = error_bound_check(e1, e2, z, N, beta, s.eps, p.eps_star2, beta);
    med_ratio.push_back(median(ratio));
    viol.push_back(bound.violation_fraction);
    out.rows.push_back(detail::info_row("median_E_I_over_Z", N, beta, median(ratio)));
    out.rows.push_back(detail::info_row("error_violation_fraction", N, beta, bound.violation_fraction));
    out.rows.push_back(detail::info_row("error_violation_fraction_linear", N, beta, bound.violation_fraction_linear));
    out.rows.push_back(detail::info_row("E_II_ratio_max", N, beta, bound.ii_ratio_max));
  }
  out.rows.push_back(make_row("error_telescoping", 0, beta, telescope, 1e-9));
  out.files.emplace("blocks.csv", csv);
  out.checks.push_back({"error_telescoping", telescope <= 1e-9, "max |E_I - E_I1 - E_I3 - E_I4| " + detail::num(telescope)});
  out.checks.push_back({"median_E_I_over_Z_decreasing", strictly_decreasing(med_ratio), "medians " + detail::list(med_ratio)});
  return out;
}

/// Time and space regularity statistics of Z at a small beta where tau_N_star is short.
inline SuiteOutput suite_regularity(const SuiteSettings& s) {
  SuiteOutput out;
  out.suite = "regularity";
  int N = s.N_or({32}).front();
  double beta = s.beta_or({0.01}).front();
  int W = s.window_or(4 * N + 1);
  const long R = s.replicas_or(20);
  auto p = detail::make_params(N, beta, W);
  auto k = derive_constants(p, s.convention);
  auto sched = build_schedule(p, s.eps, s.delta);
  Ring ring(W);
  RunOptions opt;
  opt.snapshot_dt = sched.tau_N_star / 2;
  opt.t_final = 40 * opt.snapshot_dt;
  detail::seeds_for(out, s.seed, R);
  auto reps = orchestrate_ensemble(R, s.seed, s.workers, [&](long, Rng& rng) {
    auto init = init_config(InitKind::BernoulliHalf, ring, rng, {});
    auto res = run(init, k, opt, rng);
    auto ch = build_ch_field(res.traj, k);
    return z_regularity_stats(ch, res.traj, sched, N, beta).rows;
  });
  std::map<std::string, Row> worst;
  std::vector<std::string> order;
  for (const auto& rows : reps)
    for (const auto& r : rows) {
      auto it = worst.find(r.name);
      if (it == worst.end()) {
        worst[r.name] = r;
        order.push_back(r.name);
      } else if (r.value > it->second.value) {
        it->second = r;
      }
    }
  bool ok = true;
  for (const auto& name : order) {
    out.rows.push_back(worst[name]);
    ok = ok && worst[name].pass;
  }
  out.checks.push_back({"z_regularity", ok, "worst replica within every bound"});
  return out;
}

using SuiteFn = std::function<SuiteOutput(const SuiteSettings&)>;

inline const std::map<std::string, SuiteFn>& suite_table() {
  static const std::map<std::string, SuiteFn> t{
      {"residual", suite_residual}, {"kernel", suite_kernel},         {"oracle", suite_oracle},
      {"duhamel", suite_duhamel},   {"nash", suite_nash},             {"gap", suite_gap},
      {"sobolev", suite_sobolev},   {"azuma", suite_azuma},           {"martingale", suite_martingale},
      {"pathwise", suite_pathwise}, {"kpz", suite_kpz},               {"blocks", suite_blocks},
      {"regularity", suite_regularity}};
  return t;
}

inline SuiteOutput run_suite(const std::string& name, const SuiteSettings& s) {
  auto it = suite_table().find(name);
  if (it == suite_table().end()) throw ValidationError("unknown suite '" + name + "'");
  return it->second(s);
}

}  // namespace slowbond

#endif
