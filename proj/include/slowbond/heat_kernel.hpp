#ifndef SLOWBOND_HEAT_KERNEL_HPP
#define SLOWBOND_HEAT_KERNEL_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "slowbond/bessel.hpp"
#include "slowbond/model.hpp"
#include "slowbond/rng.hpp"
#include "slowbond/stats.hpp"

namespace slowbond {

/// Site-inhomogeneous lattice Laplacian on the ring,
/// (L f)_x = D_x (f_{x+1} + f_{x-1} - 2 f_x).
/// With a nonzero twist theta the ring is closed quasi-periodically: the right neighbour
/// of the last site is e^{-theta} f_first and the left neighbour of the first site is
/// e^{theta} f_last.
struct Generator {
  std::vector<double> D;
  double twist = 0.0;

  int W() const { return static_cast<int>(D.size()); }
  double max_rate() const { return 2.0 * *std::max_element(D.begin(), D.end()); }
};

inline Generator inhomogeneous_generator(const DerivedConstants& k) { return {k.diffusivity, 0.0}; }

inline Generator homogeneous_generator(const DerivedConstants& k) {
  return {std::vector<double>(k.diffusivity.size(), k.D_bar), 0.0};
}

inline Eigen::MatrixXd generator_matrix(const Generator& g) {
  const int W = g.W();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(W, W);
  for (int i = 0; i < W; ++i) {
    double right = i + 1 == W ? std::exp(-g.twist) : 1.0;
    double left = i == 0 ? std::exp(g.twist) : 1.0;
    L(i, i) -= 2.0 * g.D[i];
    L(i, (i + 1) % W) += g.D[i] * right;
    L(i, (i + W - 1) % W) += g.D[i] * left;
  }
  return L;
}

/// y = L x for a vector (or each column of a matrix).
inline void apply_generator(const Generator& g, const Eigen::Ref<const Eigen::MatrixXd>& x,
                            Eigen::Ref<Eigen::MatrixXd> y) {
  const int W = g.W();
  const double er = std::exp(-g.twist), el = std::exp(g.twist);
  for (int i = 0; i < W; ++i) {
    int ip = i + 1 == W ? 0 : i + 1, im = i == 0 ? W - 1 : i - 1;
    double r = i + 1 == W ? er : 1.0, l = i == 0 ? el : 1.0;
    y.row(i) = g.D[i] * (r * x.row(ip) + l * x.row(im) - 2.0 * x.row(i));
  }
}

enum class KernelMethod { Uniformization, Expm, Ode };

inline KernelMethod kernel_method_from_string(const std::string& s) {
  if (s == "uniformization") return KernelMethod::Uniformization;
  if (s == "expm") return KernelMethod::Expm;
  if (s == "ode") return KernelMethod::Ode;
  throw ValidationError("unknown kernel method '" + s + "'");
}

/// P(S, T): row x is the law at time T of the walk started from x at time S.
struct KernelMatrix {
  double S = 0.0;
  double T = 0.0;
  Eigen::MatrixXd P;
  Diffusivity convention = Diffusivity::Matched;
  std::vector<std::string> warnings;
};

namespace detail {

/// e^{tL} by uniformization: a Poisson mixture of powers of I + L / Lambda over a short
/// base step, followed by repeated squaring. Without twist every stage is a product of
/// nonnegative stochastic matrices.
inline Eigen::MatrixXd uniformized_exp(const Generator& g, double t) {
  const int W = g.W();
  if (t == 0.0) return Eigen::MatrixXd::Identity(W, W);
  const double Lambda = g.max_rate();
  int squarings = 0;
  double h = t;
  while (Lambda * h > 16.0) {
    h *= 0.5;
    ++squarings;
  }
  const double mu = Lambda * h;
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(W, W);  // B^k
  Eigen::MatrixXd tmp(W, W);
  double weight = std::exp(-mu);
  Eigen::MatrixXd P = weight * term;
  for (int kk = 1; kk < 400; ++kk) {
    apply_generator(g, term, tmp);
    term += tmp / Lambda;
    weight *= mu / kk;
    P += weight * term;
    if (kk > mu && weight < 1e-20) break;
  }
  for (int s = 0; s < squarings; ++s) P = (P * P).eval();
  return P;
}

inline Eigen::MatrixXd rk4_exp(const Generator& g, double t) {
  const int W = g.W();
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(W, W);
  if (t == 0.0) return P;
  auto steps = static_cast<long>(std::ceil(g.max_rate() * t / 0.004));
  steps = std::max(steps, 1L);
  if (steps > 5'000'000) throw ValidationError("ode method: instance too stiff for the oracle");
  const double h = t / static_cast<double>(steps);
  Eigen::MatrixXd k1(W, W), k2(W, W), k3(W, W), k4(W, W);
  for (long s = 0; s < steps; ++s) {
    apply_generator(g, P, k1);
    apply_generator(g, P + 0.5 * h * k1, k2);
    apply_generator(g, P + 0.5 * h * k2, k3);
    apply_generator(g, P + h * k3, k4);
    P += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return P;
}

}  // namespace detail

/// The kernel e^{(T-S) L}. expm falls back to uniformization on windows above 513 sites.
inline KernelMatrix solve_kernel(const Generator& g, double S, double T,
                                 KernelMethod method = KernelMethod::Uniformization,
                                 Diffusivity conv = Diffusivity::Matched) {
  if (!(S >= 0.0) || !(T >= S)) throw ValidationError("need 0 <= S <= T");
  KernelMatrix K;
  K.S = S;
  K.T = T;
  K.convention = conv;
  const double t = T - S;
  switch (method) {
    case KernelMethod::Uniformization:
      K.P = detail::uniformized_exp(g, t);
      break;
    case KernelMethod::Expm:
      if (g.W() > 513) {
        K.warnings.push_back("window too large for dense expm; used uniformization");
        K.P = detail::uniformized_exp(g, t);
      } else {
        K.P = (generator_matrix(g) * t).exp();
      }
      break;
    case KernelMethod::Ode:
      K.P = detail::rk4_exp(g, t);
      break;
  }
  return K;
}

inline KernelMatrix solve_kernel(const DerivedConstants& k, double S, double T,
                                 KernelMethod method = KernelMethod::Uniformization) {
  return solve_kernel(inhomogeneous_generator(k), S, T, method, k.convention);
}

/// Law of the constant-rate walk (rate D to each side) after time t, as a function of the
/// displacement d = 0..W-1 around the ring: sum over images of e^{-2Dt} I_{|d + jW|}(2Dt).
inline std::vector<double> homogeneous_profile(double D, int W, double t) {
  const double x = 2.0 * D * t;
  int reach = static_cast<int>(std::ceil(12.0 * std::sqrt(x) + 40.0));
  int n_max = std::max(W, reach);
  auto b = scaled_bessel_i(x, n_max);
  std::vector<double> g(W, 0.0);
  const long J = n_max / W + 1;
  for (int d = 0; d < W; ++d)
    for (long j = -J; j <= J; ++j) {
      long n = std::abs(d + j * W);
      if (n <= n_max) g[d] += b[n];
    }
  return g;
}

inline KernelMatrix homogeneous_kernel(double D, int W, double S, double T) {
  if (!(S >= 0.0) || !(T >= S)) throw ValidationError("need 0 <= S <= T");
  auto g = homogeneous_profile(D, W, T - S);
  KernelMatrix K;
  K.S = S;
  K.T = T;
  K.P.resize(W, W);
  for (int x = 0; x < W; ++x)
    for (int y = 0; y < W; ++y) K.P(x, y) = g[(y - x + W) % W];
  return K;
}

inline KernelMatrix homogeneous_kernel(const DerivedConstants& k, double S, double T) {
  auto K = homogeneous_kernel(k.D_bar, static_cast<int>(k.diffusivity.size()), S, T);
  K.convention = k.convention;
  return K;
}

// ---------------------------------------------------------------------------
// Structural checks

inline double max_row_sum_deviation(const Eigen::MatrixXd& P) {
  return (P.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

/// sum_x P_{x,y} / D_x, the quantity conserved in time (the walk's invariant measure is
/// proportional to 1/D).
inline Eigen::VectorXd weighted_column_mass(const Eigen::MatrixXd& P, const std::vector<double>& D) {
  Eigen::VectorXd w(P.rows());
  for (int x = 0; x < P.rows(); ++x) w[x] = 1.0 / D[x];
  return P.transpose() * w;
}

struct MaxPrincipleReport {
  bool pass = true;
  double min_entry = 0.0;
  double max_entry = 0.0;
  bool sup_nonincreasing = true;
};

/// Entries in [0, 1 + 1e-12] for every kernel, and sup_{x,y} P non-increasing along the
/// given sequence (kernels ordered by increasing T - S).
inline MaxPrincipleReport max_principle_check(const std::vector<const Eigen::MatrixXd*>& Ps) {
  MaxPrincipleReport r;
  r.min_entry = INFINITY;
  r.max_entry = -INFINITY;
  double prev = INFINITY;
  for (const auto* P : Ps) {
    double lo = P->minCoeff(), hi = P->maxCoeff();
    r.min_entry = std::min(r.min_entry, lo);
    r.max_entry = std::max(r.max_entry, hi);
    if (hi > prev + 1e-13) r.sup_nonincreasing = false;
    prev = hi;
  }
  r.pass = r.min_entry >= 0.0 && r.max_entry <= 1.0 + 1e-12 && r.sup_nonincreasing;
  return r;
}

// ---------------------------------------------------------------------------
// Duhamel

struct DuhamelResult {
  double residual = 0.0;
  long nodes = 0;
};

/// max_{x,y} |P - Pbar + int_S^T sum_w P(R,T)_{x,w} (Dbar - D_w) (Delta Pbar(S,R))_{w,y} dR|,
/// where Delta acts on w. Composite midpoint rule with nodes spaced by about
/// quadrature_dt. Columns of P(R,T) are propagated with the exact short-time kernel and
/// rows of Pbar come from the Bessel form.
inline DuhamelResult duhamel_residual(const KernelMatrix& P, const KernelMatrix& Pbar,
                                      const DerivedConstants& k, double quadrature_dt) {
  const double t = P.T - P.S;
  if (std::abs((Pbar.T - Pbar.S) - t) > 1e-15 * std::max(1.0, t))
    throw ValidationError("kernels must span the same interval");
  const int W = static_cast<int>(P.P.rows());
  DuhamelResult out;
  if (t == 0.0) {
    out.residual = (P.P - Pbar.P).cwiseAbs().maxCoeff();
    return out;
  }
  long n = std::max(1L, std::lround(t / quadrature_dt));
  const double h = t / static_cast<double>(n);
  out.nodes = n;
  Generator g = inhomogeneous_generator(k);
  Eigen::MatrixXd step = detail::uniformized_exp(g, h);
  Eigen::MatrixXd half = detail::uniformized_exp(g, 0.5 * h);

  std::vector<int> defect;
  for (int w = 0; w < W; ++w)
    if (k.D_bar - k.diffusivity[w] != 0.0) defect.push_back(w);

  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(W, W);
  Eigen::MatrixXd cols(W, static_cast<long>(defect.size()));
  for (std::size_t j = 0; j < defect.size(); ++j) cols.col(j) = half.col(defect[j]);
  Eigen::VectorXd lap(W);
  for (long j = 0; j < n; ++j) {
    // column node at T - R = (j + 1/2) h, row node at R - S = t - (j + 1/2) h
    double r = t - (static_cast<double>(j) + 0.5) * h;
    auto g_row = homogeneous_profile(k.D_bar, W, r);
    for (std::size_t c = 0; c < defect.size(); ++c) {
      int w = defect[c];
      for (int y = 0; y < W; ++y) {
        int d = (y - w + W) % W;
        lap[y] = g_row[(d + W - 1) % W] + g_row[(d + 1) % W] - 2.0 * g_row[d];
      }
      acc.noalias() += (h * (k.D_bar - k.diffusivity[w])) * cols.col(c) * lap.transpose();
    }
    cols = (step * cols).eval();
  }
  out.residual = (P.P - Pbar.P + acc).cwiseAbs().maxCoeff();
  return out;
}

// ---------------------------------------------------------------------------
// Estimates

struct EstimateReport {
  std::string name;
  int N = 0;
  double beta_star = 0.0;
  double constant = 0.0;
  double exponent = 0.0;
  bool pass = false;
  bool inconclusive = false;
  std::vector<double> t_grid;
  std::vector<double> values;
};

/// Odd window large enough that wrap-around images of the kernel at time t are below
/// e^{-32} relative: half-width 8 N sqrt(t).
inline int wrap_safe_window(int N, double t, int minimum = 33) {
  int half = static_cast<int>(std::ceil(8.0 * N * std::sqrt(std::max(t, 1.0 / (double(N) * N)))));
  return std::max(minimum, 2 * half + 1);
}

/// Regression of log sup P(0, t) on log t over t = 10 N^{-2} 2^j <= 1. The constant is
/// max_t sqrt(t) sup P divided by N^{-1 + 5/2 beta}.
inline EstimateReport nash_on_diagonal_fit(const DerivedConstants& k, double slope_tol = 0.1,
                                           double constant_bound = 1.0) {
  EstimateReport rep;
  rep.name = "nash_on_diagonal";
  rep.N = k.N;
  rep.beta_star = k.beta_star;
  const double N = k.N;
  double t = 10.0 / (N * N);
  Generator g = inhomogeneous_generator(k);
  Eigen::MatrixXd P = detail::uniformized_exp(g, t);
  double best = 0.0;
  while (t <= 1.0 + 1e-12) {
    double sup = P.maxCoeff();
    rep.t_grid.push_back(t);
    rep.values.push_back(sup);
    best = std::max(best, std::sqrt(t) * sup);
    t *= 2.0;
    if (t <= 1.0 + 1e-12) P = (P * P).eval();
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < rep.t_grid.size(); ++i) {
    lx.push_back(std::log(rep.t_grid[i]));
    ly.push_back(std::log(rep.values[i]));
  }
  rep.inconclusive = rep.t_grid.size() < 4;
  if (rep.t_grid.size() >= 2) rep.exponent = fit_line(lx, ly).slope;
  rep.constant = best / std::pow(N, -1.0 + 2.5 * k.beta_star);
  rep.pass = !rep.inconclusive && std::abs(rep.exponent + 0.5) <= slope_tol &&
             rep.constant <= constant_bound;
  return rep;
}

/// exp(kappa |x - y| / max(N sqrt(rho), 1)).
inline double exp_weight(double kappa, int dist, int N, double rho) {
  return std::exp(kappa * dist / std::max(N * std::sqrt(rho), 1.0));
}

struct GapReport {
  double sup_outside = 0.0;             // sup_{x, y outside the defect neighbourhood} |P - Pbar|
  double sup_all = 0.0;                 // sup over all x, y
  std::vector<double> kappas;
  std::vector<double> weighted_outside;  // same with the exponential weight, per kappa
  std::vector<double> weighted_all;
};

/// Gap between the two kernels; the defect neighbourhood is every y within
/// i_partial1_halfwidth of a slow bond.
inline GapReport perturbative_gap(const KernelMatrix& P, const KernelMatrix& Pbar,
                                  const ModelParams& p, const ScaleSchedule& s,
                                  std::vector<double> kappas = {1.0, 2.0, 5.0}) {
  const int W = static_cast<int>(P.P.rows());
  Ring ring(W);
  std::vector<char> near(W, 0);
  for (int y = 0; y < W; ++y)
    for (int b : p.slow_bonds)
      if (ring.distance(ring.site(y), b) <= s.i_partial1_halfwidth) near[y] = 1;
  GapReport r;
  r.kappas = kappas;
  r.weighted_outside.assign(kappas.size(), 0.0);
  r.weighted_all.assign(kappas.size(), 0.0);
  const double rho = P.T - P.S;
  for (int x = 0; x < W; ++x)
    for (int y = 0; y < W; ++y) {
      double d = std::abs(P.P(x, y) - Pbar.P(x, y));
      int dist = ring.distance(ring.site(x), ring.site(y));
      r.sup_all = std::max(r.sup_all, d);
      if (!near[y]) r.sup_outside = std::max(r.sup_outside, d);
      for (std::size_t q = 0; q < kappas.size(); ++q) {
        double wd = d * exp_weight(kappas[q], dist, p.N, rho);
        r.weighted_all[q] = std::max(r.weighted_all[q], wd);
        if (!near[y]) r.weighted_outside[q] = std::max(r.weighted_outside[q], wd);
      }
    }
  return r;
}

/// sup_{x,y} |P_{x+k,y} - P_{x,y}| (x + k taken around the ring), optionally weighted.
inline double sup_space_gradient(const Eigen::MatrixXd& P, int k, double kappa = 0.0, int N = 1,
                                 double rho = 0.0) {
  const int W = static_cast<int>(P.rows());
  Ring ring(W);
  double best = 0.0;
  for (int x = 0; x < W; ++x) {
    int xk = ring.wrap(static_cast<long>(x) + k);
    for (int y = 0; y < W; ++y) {
      double v = std::abs(P(xk, y) - P(x, y));
      if (kappa != 0.0) v *= exp_weight(kappa, ring.distance(ring.site(x), ring.site(y)), N, rho);
      best = std::max(best, v);
    }
  }
  return best;
}

inline double sup_time_difference(const Eigen::MatrixXd& P_later, const Eigen::MatrixXd& P) {
  return (P_later - P).cwiseAbs().maxCoeff();
}

struct RegularityEstimate {
  double grad = 0.0;
  double grad_bound_shape = 0.0;  // |k| N^{-2} rho^{-1} + N^{-1-93 beta}
  double time_diff = 0.0;
  double time_bound_shape = 0.0;  // N^{-1} tau^{1/2} rho^{-1}
};

/// Spatial gradient at lag k and time difference over tau of the kernel at time rho,
/// with the two-term bound shapes (constants not fitted).
inline RegularityEstimate kernel_regularity(const Generator& g, double rho, int k, double tau,
                                            int N, double beta) {
  RegularityEstimate e;
  Eigen::MatrixXd P = detail::uniformized_exp(g, rho);
  e.grad = sup_space_gradient(P, k);
  if (tau > 0.0) {
    Eigen::MatrixXd Pt = P * detail::uniformized_exp(g, tau);
    e.time_diff = sup_time_difference(Pt, P);
  }
  const double Nd = N;
  e.grad_bound_shape = std::abs(k) / (Nd * Nd * rho) + std::pow(Nd, -1.0 - 93.0 * beta);
  e.time_bound_shape = std::sqrt(tau) / (Nd * rho);
  return e;
}

// ---------------------------------------------------------------------------
// Nash-Sobolev and random walk oracles

/// |phi|_2^2 / (|phi|_1^{4/3} |grad phi|_2^{2/3}) with the gradient rescaled by N.
inline double nash_ratio(const std::vector<double>& phi, int N) {
  double l1 = 0.0, l2 = 0.0, g2 = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    l1 += std::abs(phi[i]);
    l2 += phi[i] * phi[i];
  }
  // finitely supported: pad with zeros on both sides
  double prev = 0.0;
  for (double v : phi) {
    g2 += (v - prev) * (v - prev);
    prev = v;
  }
  g2 += prev * prev;
  g2 *= double(N) * N;
  if (l1 == 0.0) return 0.0;
  return l2 / (std::pow(l1, 4.0 / 3.0) * std::pow(g2, 1.0 / 3.0));
}

/// Random finitely supported test function on `support` sites: a few bumps of random
/// shape and width plus a small rough component.
inline std::vector<double> random_test_function(Rng& rng, int support) {
  std::vector<double> phi(support, 0.0);
  int bumps = 1 + static_cast<int>(rng.below(3));
  for (int b = 0; b < bumps; ++b) {
    double width = 1.0 + rng.uniform() * 0.5 * support;
    double centre = rng.uniform() * support;
    double amp = 0.2 + rng.uniform();
    bool tent = rng.coin();
    for (int i = 0; i < support; ++i) {
      double z = (i - centre) / width;
      phi[i] += amp * (tent ? std::max(0.0, 1.0 - std::abs(z)) : std::exp(-0.5 * z * z));
    }
  }
  double rough = 0.1 * rng.uniform();
  for (auto& v : phi) v += rough * (2.0 * rng.uniform() - 1.0);
  return phi;
}

struct SobolevReport {
  std::vector<int> supports;
  std::vector<double> max_ratio;  // per support size, times N^{2/3}
  double spread = 0.0;            // max / min over support sizes
};

/// Max of the Nash ratio (times N^{2/3}, which removes the rescaling) over random test
/// functions for each support size.
inline SobolevReport nash_sobolev_check(Rng& rng, int trials_per_support,
                                        const std::vector<int>& supports, int N) {
  SobolevReport r;
  r.supports = supports;
  for (int s : supports) {
    double best = 0.0;
    for (int t = 0; t < trials_per_support; ++t) {
      auto phi = random_test_function(rng, s);
      double v = nash_ratio(phi, N);
      if (v == 0.0) continue;
      best = std::max(best, v * std::pow(double(N), 2.0 / 3.0));
    }
    r.max_ratio.push_back(best);
  }
  double hi = *std::max_element(r.max_ratio.begin(), r.max_ratio.end());
  double lo = *std::min_element(r.max_ratio.begin(), r.max_ratio.end());
  r.spread = lo > 0 ? hi / lo : INFINITY;
  return r;
}

struct WalkSample {
  std::vector<double> distribution;  // empirical law over ring indices
  std::vector<long> displacement;    // unwrapped displacement per replica
};

/// Monte Carlo of the walk with rate D_x to each neighbour, started at ring index x0.
inline WalkSample random_walk_oracle(const Generator& g, Rng& rng, long replicas, double t, int x0) {
  const int W = g.W();
  WalkSample s;
  s.distribution.assign(W, 0.0);
  s.displacement.resize(replicas);
  for (long r = 0; r < replicas; ++r) {
    int x = x0;
    long disp = 0;
    double clock = 0.0;
    while (true) {
      clock += rng.exponential(2.0 * g.D[x]);
      if (clock > t) break;
      int step = rng.coin() ? 1 : -1;
      disp += step;
      x = (x + step + W) % W;
    }
    s.distribution[x] += 1.0;
    s.displacement[r] = disp;
  }
  for (auto& v : s.distribution) v /= static_cast<double>(replicas);
  return s;
}

inline double total_variation(const std::vector<double>& a, const Eigen::VectorXd& b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[static_cast<long>(i)]);
  return 0.5 * tv;
}

/// Azuma-type tail bound for the walk: a walk with at most n jumps satisfies
/// P(|X| >= L) <= 2 exp(-L^2 / (2 n)); averaged over n ~ Poisson(2 D_max t).
inline double walk_tail_bound(double L, double mean_jumps) {
  double bound = 0.0, w = std::exp(-mean_jumps), mass = 0.0;
  for (long n = 0; n < 100000; ++n) {
    if (n > 0) w *= mean_jumps / static_cast<double>(n);
    mass += w;
    double b = n == 0 ? (L > 0 ? 0.0 : 1.0) : std::min(1.0, 2.0 * std::exp(-L * L / (2.0 * n)));
    bound += w * b;
    if (static_cast<double>(n) > mean_jumps && w < 1e-18) break;
  }
  return bound + std::max(0.0, 1.0 - mass);
}

}  // namespace slowbond

#endif
