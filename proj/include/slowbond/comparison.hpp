#ifndef SLOWBOND_COMPARISON_HPP
#define SLOWBOND_COMPARISON_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "slowbond/field.hpp"
#include "slowbond/gartner.hpp"
#include "slowbond/heat_kernel.hpp"
#include "slowbond/model.hpp"
#include "slowbond/rng.hpp"
#include "slowbond/simulator.hpp"
#include "slowbond/stats.hpp"

namespace slowbond {

struct AuxOptions {
  /// Add the slow-bond residual R(eta) Y to the drift of Y; Y then reproduces Z.
  bool include_residual = false;
  /// Upper bound on a single propagation step between events.
  double max_substep = INFINITY;
};

struct AuxFields {
  Field Y;
  Field X;
  double twist = 0.0;
};

namespace detail {

/// v <- exp(dt A) v with A v = D_x (v_{x+1} + v_{x-1} - 2 v_x) + c_x v_x on the twisted ring,
/// by Taylor series on substeps with |dt A| <= 1/2.
inline void propagate(std::vector<double>& v, const std::vector<double>& D, const std::vector<double>& c,
                      double twist_r, double twist_l, double dt, double norm_A, double max_substep) {
  if (dt <= 0.0) return;
  const int W = static_cast<int>(v.size());
  int sub = static_cast<int>(std::ceil(std::max(dt * norm_A / 0.5, dt / max_substep)));
  sub = std::max(sub, 1);
  const double h = dt / sub;
  std::vector<double> term(W), next(W);
  for (int s = 0; s < sub; ++s) {
    term = v;
    double vmax = 0.0;
    for (double x : v) vmax = std::max(vmax, std::abs(x));
    for (int k = 1; k < 60; ++k) {
      double tmax = 0.0;
      const double f = h / k;
      for (int i = 0; i < W; ++i) {
        double right = i + 1 == W ? twist_r * term[0] : term[i + 1];
        double left = i == 0 ? twist_l * term[W - 1] : term[i - 1];
        next[i] = f * (D[i] * (right + left - 2.0 * term[i]) + c[i] * term[i]);
        tmax = std::max(tmax, std::abs(next[i]));
      }
      for (int i = 0; i < W; ++i) v[i] += next[i];
      term.swap(next);
      if (tmax <= 1e-17 * vmax) break;
    }
  }
}

}  // namespace detail

/// Y and X driven by the recorded noise of Z (same event log):
///   dY = L Y dt + Y_{t-} dxi,  dX = Lbar X dt + X_{t-} dxi,  Y_0 = X_0 = Z_0,
/// with L, Lbar the inhomogeneous and homogeneous generators on the twisted ring that
/// carries Z. Between events the linear flow (heat flow minus compensator) is applied
/// exactly; at each event both fields are multiplied by 1 + mark at the jump site.
inline AuxFields solve_aux_fields(const SpinConfig& init, const EventLog& log, const DerivedConstants& k,
                                  const std::vector<double>& times, const ResidualDecomposition* res = nullptr,
                                  const AuxOptions& opt = {}) {
  const int W = static_cast<int>(init.size());
  Ring ring(W);
  if (opt.include_residual && res == nullptr) throw ValidationError("residual requested but not supplied");
  CompensatedNoise rule = noise_rule(k);
  SpinConfig c = init;
  std::vector<double> h(W);
  fill_height(c, 0, k.lambda, h.data());
  std::vector<double> y(W), x(W);
  for (int i = 0; i < W; ++i) y[i] = x[i] = std::exp(-h[i]);

  AuxFields out;
  out.twist = k.lambda * static_cast<double>(c.total());
  const double tr = std::exp(-out.twist), tl = std::exp(out.twist);
  out.Y = Field(times, W);
  out.X = Field(times, W);
  std::vector<double> Dbar(W, k.D_bar);
  std::vector<double> cy(W), cx(W);
  auto local = [&](int i) {
    double r = rule.intensity(c, k, i);
    double extra = 0.0;
    if (opt.include_residual && k.slow[i])
      extra = res->R_slow(c.spins[i], c.spins[ring.next(i)]);
    cy[i] = -r + extra;
    cx[i] = -r;
  };
  for (int i = 0; i < W; ++i) local(i);
  const double dmax = *std::max_element(k.diffusivity.begin(), k.diffusivity.end());
  const double cmax = std::max(std::abs(rule.mark_left) * (k.p_normal + k.p_slow),
                               std::abs(rule.mark_right) * (k.q_normal + k.q_slow)) +
                      (res ? std::abs(static_cast<double>(res->C_N)) * 4.0 : 0.0);
  const double norm_y = 4.0 * dmax * std::max(tl, 1.0) + cmax;
  const double norm_x = 4.0 * k.D_bar * std::max(tl, 1.0) + cmax;

  double t = 0.0;
  std::size_t e = 0;
  for (std::size_t s = 0; s < times.size(); ++s) {
    while (e < log.events.size() && log.events[e].time <= times[s]) {
      const auto& ev = log.events[e++];
      detail::propagate(y, k.diffusivity, cy, tr, tl, ev.time - t, norm_y, opt.max_substep);
      detail::propagate(x, Dbar, cx, tr, tl, ev.time - t, norm_x, opt.max_substep);
      t = ev.time;
      double m = ev.dir == Dir::Left ? rule.mark_left : rule.mark_right;
      y[ev.bond] *= 1.0 + m;
      x[ev.bond] *= 1.0 + m;
      int j = ring.next(ev.bond);
      std::swap(c.spins[ev.bond], c.spins[j]);
      local(ring.prev(ev.bond));
      local(ev.bond);
      local(j);
    }
    detail::propagate(y, k.diffusivity, cy, tr, tl, times[s] - t, norm_y, opt.max_substep);
    detail::propagate(x, Dbar, cx, tr, tl, times[s] - t, norm_x, opt.max_substep);
    t = times[s];
    std::copy(y.begin(), y.end(), out.Y.row(s));
    std::copy(x.begin(), x.end(), out.X.row(s));
  }
  return out;
}

/// Largest relative change of Y and X when every propagation step is capped at
/// `substep` versus `substep / 2`.
inline double aux_substep_change(const SpinConfig& init, const EventLog& log, const DerivedConstants& k,
                                 const std::vector<double>& times, double substep) {
  AuxOptions a, b;
  a.max_substep = substep;
  b.max_substep = substep / 2;
  auto f1 = solve_aux_fields(init, log, k, times, nullptr, a);
  auto f2 = solve_aux_fields(init, log, k, times, nullptr, b);
  return std::max(max_relative_gap(f1.Y, f2.Y), max_relative_gap(f1.X, f2.X));
}

struct GapNorms {
  double phi1 = 0.0;  // |Z - Y|
  double phi2 = 0.0;  // |Y - X|
  double Y = 0.0;
  double X = 0.0;
  double Z = 0.0;
};

inline GapNorms pathwise_gaps(const Field& Z, const AuxFields& aux, int N, double kappa) {
  GapNorms g;
  g.phi1 = weighted_sup_norm(difference(Z, aux.Y), N, kappa);
  g.phi2 = weighted_sup_norm(difference(aux.Y, aux.X), N, kappa);
  g.Y = weighted_sup_norm(aux.Y, N, kappa);
  g.X = weighted_sup_norm(aux.X, N, kappa);
  g.Z = weighted_sup_norm(Z, N, kappa);
  return g;
}

// ---------------------------------------------------------------------------
// Continuum stochastic heat equation

struct SHEMesh {
  double length = 8.0;  // periodic domain [-length/2, length/2)
  double dx = 0.05;
  double dt = 0.001;
};

enum class SHEInit { Flat, Delta };

struct SHEGrid {
  double dx = 0.0;
  double dt = 0.0;
  double sigma = 1.0;
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> z;
  bool positive = true;

  /// Value at the grid point nearest to position p.
  double at(double p) const {
    auto j = static_cast<long>(std::lround(p / dx)) + static_cast<long>(z.size() - 1) / 2;
    return z[static_cast<std::size_t>(std::clamp(j, 0L, static_cast<long>(z.size()) - 1))];
  }
};

/// Explicit Euler-Maruyama for dz = 1/2 z'' dt + sigma z xi on a periodic grid with an
/// odd number of points centred at 0. Each cell receives an independent N(0, dt/dx)
/// increment. A delta initial condition puts mass 1 at the origin.
inline SHEGrid she_solve(SHEInit init, double t_final, const SHEMesh& mesh, Rng* rng, double sigma = 1.0) {
  if (!(mesh.dx > 0.0) || !(mesh.dt > 0.0) || !(t_final >= 0.0)) throw ValidationError("bad SHE mesh");
  if (mesh.dt > 0.5 * mesh.dx * mesh.dx) throw ValidationError("SHE mesh violates dt <= dx^2 / 2");
  long M = std::lround(mesh.length / mesh.dx);
  if (M % 2 == 0) ++M;
  SHEGrid g;
  g.dx = mesh.dx;
  g.dt = mesh.dt;
  g.sigma = sigma;
  g.x.resize(M);
  g.z.assign(M, init == SHEInit::Flat ? 1.0 : 0.0);
  const long c = (M - 1) / 2;
  for (long j = 0; j < M; ++j) g.x[j] = static_cast<double>(j - c) * mesh.dx;
  if (init == SHEInit::Delta) g.z[c] = 1.0 / mesh.dx;
  auto steps = static_cast<long>(std::llround(t_final / mesh.dt));
  const double a = 0.5 * mesh.dt / (mesh.dx * mesh.dx);
  const double noise = sigma * std::sqrt(mesh.dt / mesh.dx);
  std::vector<double> next(M);
  for (long s = 0; s < steps; ++s) {
    for (long j = 0; j < M; ++j) {
      double l = g.z[j == 0 ? M - 1 : j - 1], r = g.z[j + 1 == M ? 0 : j + 1];
      double v = g.z[j] + a * (l + r - 2.0 * g.z[j]);
      if (rng && sigma != 0.0) v += noise * g.z[j] * rng->normal();
      next[j] = v;
    }
    g.z.swap(next);
    for (double v : g.z)
      if (v <= 0.0) g.positive = false;
  }
  g.t = static_cast<double>(steps) * mesh.dt;
  return g;
}

/// Exact heat semigroup e^{t/2 d^2} of the initial data on the infinite line, evaluated
/// at p (Gaussian kernel); flat data stays 1.
inline double heat_flow_exact(SHEInit init, double t, double p) {
  if (init == SHEInit::Flat) return 1.0;
  return std::exp(-p * p / (2.0 * t)) / std::sqrt(2.0 * M_PI * t);
}

// ---------------------------------------------------------------------------
// Distributional comparison

enum class Normalization { None, UnitMass };

/// log of the microscopic field at (snapshot t, site x), rescaled so that narrow-wedge
/// data has unit mass sum_x Z_{0,x} / N = 1.
inline double micro_log_z(const Field& Z, std::size_t t, int i, int N, Normalization norm, InitKind init) {
  if (init == InitKind::NarrowWedge && norm != Normalization::UnitMass)
    throw ValidationError("narrow-wedge data must be compared after unit-mass rescaling");
  double factor = 1.0;
  if (norm == Normalization::UnitMass) {
    double mass = 0.0;
    for (int j = 0; j < Z.W; ++j) mass += Z(0, j);
    factor = static_cast<double>(N) / mass;
  }
  return std::log(factor * Z(t, i));
}

struct CompareRow {
  int N = 0;
  double beta_star = 0.0;
  double T = 0.0;
  double x = 0.0;
  std::string statistic;
  double value = 0.0;
  double stderr_ = 0.0;
};

/// KS distances between the reference ensemble (beta = 0) and each perturbed ensemble at
/// the same N, and between each microscopic ensemble and the SHE ensemble if given.
inline std::vector<CompareRow> kpz_distribution_compare(
    const std::map<std::pair<int, double>, std::vector<double>>& micro, const std::vector<double>& she,
    double T, double x) {
  std::vector<CompareRow> rows;
  for (const auto& [key, sample] : micro) {
    auto [N, beta] = key;
    if (beta != 0.0) {
      auto ref = micro.find({N, 0.0});
      if (ref != micro.end()) {
        double d = ks_statistic(ref->second, sample);
        rows.push_back({N, beta, T, x, "ks_vs_beta0", d, 0.0});
        rows.push_back({N, beta, T, x, "ks_vs_beta0_pvalue", ks_pvalue(d, ref->second.size(), sample.size()), 0.0});
      }
    }
    if (!she.empty()) {
      double d = ks_statistic(sample, she);
      rows.push_back({N, beta, T, x, "ks_vs_she", d, 0.0});
    }
    rows.push_back({N, beta, T, x, "mean_log_z", mean(sample), std_error(sample)});
  }
  return rows;
}

/// int_0^T N^{-1} sum_x phi(x/N) prod_j eta_{S,x+i_j} X_{S,x}^2 dS, trapezoid on the
/// snapshot grid; sites whose offsets leave the window are skipped.
inline double quadratic_functional(const TrajectorySample& traj, const Field& X,
                                   const std::function<double(double)>& phi,
                                   const std::vector<int>& offsets, int N) {
  std::vector<int> o = offsets;
  std::sort(o.begin(), o.end());
  if (std::adjacent_find(o.begin(), o.end()) != o.end()) throw ValidationError("offsets must be distinct");
  const int W = X.W;
  Ring ring(W);
  std::vector<double> f(X.nt(), 0.0);
  for (std::size_t t = 0; t < X.nt(); ++t) {
    const auto& s = traj.spins[t].spins;
    double acc = 0.0;
    for (int i = 0; i < W; ++i) {
      double w = phi(static_cast<double>(ring.site(i)) / N);
      if (w == 0.0) continue;
      int prod = 1;
      bool inside = true;
      for (int off : offsets) {
        int j = i + off;
        if (j < 0 || j >= W) {
          inside = false;
          break;
        }
        prod *= s[j];
      }
      if (inside) acc += w * prod * X(t, i) * X(t, i);
    }
    f[t] = acc / N;
  }
  double total = 0.0;
  for (std::size_t t = 1; t < f.size(); ++t) total += 0.5 * (X.times[t] - X.times[t - 1]) * (f[t] + f[t - 1]);
  return total;
}

}  // namespace slowbond

#endif
