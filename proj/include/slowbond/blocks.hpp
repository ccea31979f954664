#ifndef SLOWBOND_BLOCKS_HPP
#define SLOWBOND_BLOCKS_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slowbond/field.hpp"
#include "slowbond/gartner.hpp"
#include "slowbond/heat_kernel.hpp"
#include "slowbond/model.hpp"
#include "slowbond/simulator.hpp"
#include "slowbond/stats.hpp"

namespace slowbond {

struct AveragedStatistic {
  std::string tag;
  int anchor = 0;  // ring coordinate
  std::vector<double> times;
  std::vector<double> values;
  bool truncated = false;
};

/// eta_y (1/l) sum_{w=1}^{l} eta_{y+w} for one configuration; y is a ring index.
inline double block_product(const SpinConfig& c, int y, long l) {
  long s = 0;
  for (long w = 1; w <= l; ++w) s += c.spins[y + w];
  return c.spins[y] * static_cast<double>(s) / static_cast<double>(l);
}

inline AveragedStatistic spatial_average(const TrajectorySample& traj, long l, int anchor) {
  if (l < 1) throw ValidationError("block length must be >= 1");
  Ring ring(static_cast<int>(traj.spins.front().size()));
  if (!ring.contains(anchor) || !ring.contains(static_cast<int>(anchor + l)))
    throw ValidationError("block average overruns the window");
  AveragedStatistic a;
  a.tag = "spatial:" + std::to_string(l);
  a.anchor = anchor;
  a.times = traj.times;
  for (const auto& c : traj.spins) a.values.push_back(block_product(c, ring.index(anchor), l));
  return a;
}

/// Difference of two spatial averages at lengths l1 and l2; length 0 means the bare
/// product eta_y eta_{y+1}.
inline AveragedStatistic comparison_average(const TrajectorySample& traj, long l1, long l2, int anchor) {
  auto a = spatial_average(traj, std::max(l1, 1L), anchor);
  auto b = spatial_average(traj, std::max(l2, 1L), anchor);
  for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] -= b.values[i];
  a.tag = "comparison:" + std::to_string(l1) + ";" + std::to_string(l2);
  return a;
}

/// Linear interpolation of a grid series at time s.
inline double interpolate(const std::vector<double>& t, const std::vector<double>& f, double s) {
  auto it = std::upper_bound(t.begin(), t.end(), s);
  if (it == t.begin()) return f.front();
  if (it == t.end()) return f.back();
  std::size_t j = static_cast<std::size_t>(it - t.begin());
  double w = (s - t[j - 1]) / (t[j] - t[j - 1]);
  return (1.0 - w) * f[j - 1] + w * f[j];
}

/// (1/tau) int_t^{t+tau} f ds by the trapezoid rule on the grid (and interpolated end
/// point). Where t + tau passes the last grid time the window is cut there and the
/// result is flagged as truncated.
inline AveragedStatistic time_average(const AveragedStatistic& in, double tau) {
  AveragedStatistic out = in;
  out.tag = in.tag + "|time:" + std::to_string(tau);
  if (tau <= 0.0) return out;
  const auto& t = in.times;
  const auto& f = in.values;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double end = t[i] + tau;
    if (end > t.back() + 1e-15) {
      out.truncated = true;
      end = t.back();
    }
    double len = end - t[i];
    if (len <= 0.0) {
      out.values[i] = f[i];
      continue;
    }
    double integral = 0.0, a = t[i], fa = f[i];
    for (std::size_t j = i + 1; j < t.size() && t[j] <= end; ++j) {
      integral += 0.5 * (t[j] - a) * (f[j] + fa);
      a = t[j];
      fa = f[j];
    }
    if (end > a) integral += 0.5 * (end - a) * (interpolate(t, f, end) + fa);
    out.values[i] = integral / len;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Error fields

/// Columns of P(j dt) at a set of sites, j = 0..n-1.
struct KernelTable {
  double dt = 0.0;
  std::vector<int> sites;  // ring indices
  std::vector<Eigen::MatrixXd> cols;
};

inline KernelTable kernel_table(const Generator& g, const std::vector<int>& sites, double dt, std::size_t n) {
  KernelTable t;
  t.dt = dt;
  t.sites = sites;
  const int W = g.W();
  Eigen::MatrixXd step = detail::uniformized_exp(g, dt);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(W, static_cast<long>(sites.size()));
  for (std::size_t j = 0; j < sites.size(); ++j) c(sites[j], static_cast<long>(j)) = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    t.cols.push_back(c);
    c = (step * c).eval();
  }
  return t;
}

enum ErrorPiece { kE_I = 0, kE_I1, kE_I2, kE_I3, kE_I4, kE_I5, kE_II, kPieceCount };

inline const char* piece_name(int p) {
  static const char* names[] = {"E_I", "E_I1", "E_I2", "E_I3", "E_I4", "E_I5", "E_II"};
  return names[p];
}

struct ErrorFieldSet {
  std::vector<Field> fields;  // indexed by ErrorPiece
  const Field& operator[](int p) const { return fields[p]; }
};

/// Time integrals int_0^T sum_{y slow} P(T - S)_{x,y} C_N stat_{S,y} Z_{S,y} dS by the
/// trapezoid rule on the snapshot grid, for the statistics
///   E_I: q,  E_I1: q - A_l q,  E_I2: time average over tau_N_star of (q - A_l q),
///   E_I3: A_l q - A_m q,  E_I4: A_m q,  E_I5 = E_I1 - E_I2,
///   E_II: N^{-1/2} qtilde(eta_y, eta_{y+1}),
/// with q = eta_y eta_{y+1}, A_l the block average of length l anchored at y, and
/// C_N the exact slow-bond residual scale. E_I + E_II is the full residual contribution.
inline ErrorFieldSet error_fields(const CHField& ch, const TrajectorySample& traj, const KernelTable& K,
                                  const ScaleSchedule& s, const ResidualDecomposition& res,
                                  const ModelParams& p) {
  const Field& Z = ch.Z;
  const int W = Z.W;
  const std::size_t nt = Z.nt();
  ErrorFieldSet out;
  for (int q = 0; q < kPieceCount; ++q) out.fields.emplace_back(Z.times, W);
  if (p.slow_bonds.empty() || res.C_N == 0) return out;

  Ring ring(W);
  if (nt > 1) {
    double dt = Z.times[1] - Z.times[0];
    if (std::abs(dt - K.dt) > 1e-12 * dt || K.cols.size() < nt)
      throw ValidationError("kernel table does not cover the snapshot grid");
  }
  std::vector<int> sites;
  for (int b : p.slow_bonds) sites.push_back(ring.index(b));
  if (sites != K.sites) throw ValidationError("kernel table sites differ from the slow bonds");

  const double C = static_cast<double>(res.C_N);
  const double rootN = std::sqrt(static_cast<double>(p.N));
  const std::size_t ns = sites.size();
  // stat[piece][slow][time] * Z
  std::vector<std::vector<std::vector<double>>> src(kPieceCount,
                                                    std::vector<std::vector<double>>(ns, std::vector<double>(nt)));
  for (std::size_t j = 0; j < ns; ++j) {
    int y = p.slow_bonds[j];
    auto q = spatial_average(traj, 1, y);
    auto al = spatial_average(traj, s.ell_N, y);
    auto am = spatial_average(traj, s.m_N, y);
    AveragedStatistic d1 = q;
    for (std::size_t t = 0; t < nt; ++t) d1.values[t] = q.values[t] - al.values[t];
    auto d2 = time_average(d1, s.tau_N_star);
    for (std::size_t t = 0; t < nt; ++t) {
      const auto& c = traj.spins[t].spins;
      int yi = ring.index(y);
      double z = Z(t, yi);
      double qt = res.qtilde[ResidualDecomposition::pattern_index(c[yi], c[ring.next(yi)])];
      src[kE_I][j][t] = C * q.values[t] * z;
      src[kE_I1][j][t] = C * d1.values[t] * z;
      src[kE_I2][j][t] = C * d2.values[t] * z;
      src[kE_I3][j][t] = C * (al.values[t] - am.values[t]) * z;
      src[kE_I4][j][t] = C * am.values[t] * z;
      src[kE_I5][j][t] = src[kE_I1][j][t] - src[kE_I2][j][t];
      src[kE_II][j][t] = C / rootN * qt * z;
    }
  }
  const double dt = nt > 1 ? Z.times[1] - Z.times[0] : 0.0;
  for (std::size_t T = 1; T < nt; ++T)
    for (std::size_t i = 0; i <= T; ++i) {
      double w = (i == 0 || i == T) ? 0.5 * dt : dt;
      const Eigen::MatrixXd& cols = K.cols[T - i];
      for (int piece = 0; piece < kPieceCount; ++piece) {
        double* row = out.fields[piece].row(T);
        for (std::size_t j = 0; j < ns; ++j) {
          double a = w * src[piece][j][i];
          if (a == 0.0) continue;
          for (int x = 0; x < W; ++x) row[x] += cols(x, static_cast<long>(j)) * a;
        }
      }
    }
  return out;
}

struct ErrorBoundReport {
  double violation_fraction = 0.0;        // normalisation |Z|^{1+eps}
  double violation_fraction_linear = 0.0;  // normalisation |Z|
  double ii_ratio_max = 0.0;               // max over replicas of |E_II| / (N^{-1/2+eps2+5/2 beta} |Z|)
};

/// Fraction of replicas with |E_I| + |E_II| > N^{-b}(1 + |Z|^{1+eps}) (and with |Z| in
/// place of |Z|^{1+eps}); norms are the kappa-weighted sup norms supplied per replica.
inline ErrorBoundReport error_bound_check(const std::vector<double>& e1, const std::vector<double>& e2,
                                          const std::vector<double>& z, int N, double b, double eps,
                                          double eps_star2, double beta_star) {
  ErrorBoundReport r;
  const double Nd = N;
  long v = 0, vl = 0;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    double lhs = e1[i] + e2[i];
    v += lhs > std::pow(Nd, -b) * (1.0 + std::pow(z[i], 1.0 + eps));
    vl += lhs > std::pow(Nd, -b) * (1.0 + z[i]);
    double scale = std::pow(Nd, -0.5 + eps_star2 + 2.5 * beta_star) * z[i];
    if (scale > 0) r.ii_ratio_max = std::max(r.ii_ratio_max, e2[i] / scale);
  }
  if (!e1.empty()) {
    r.violation_fraction = static_cast<double>(v) / static_cast<double>(e1.size());
    r.violation_fraction_linear = static_cast<double>(vl) / static_cast<double>(e1.size());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Canonical two-block statistic

/// Size of the two-block region: two intervals of radius 3l around y and y + w, merged
/// where they overlap.
inline int two_block_region_size(long l, long w) {
  long r = 3 * l;
  long a_hi = r, b_lo = w - r, b_hi = w + r;
  long size = (2 * r + 1) + (b_hi - std::max(b_lo, a_hi + 1) + 1);
  return static_cast<int>(size);
}

/// One sample of |(1/l) sum_{z=1}^{l} (eta_{y+z} - eta_{y+w+z})| under the canonical
/// ensemble at density rho on the two-block region.
inline double two_block_sample(Rng& rng, long l, long w, double rho) {
  if (w < l) throw ValidationError("overlapping blocks");
  int n = two_block_region_size(l, w);
  auto s = canonical_prefix(rng, n, rho, static_cast<int>(2 * l));
  long d = 0;
  for (long z = 0; z < l; ++z) d += s[z] - s[l + z];
  return std::abs(static_cast<double>(d)) / static_cast<double>(l);
}

struct AzumaReport {
  std::vector<long> ells;
  std::vector<double> rhos;
  std::vector<std::vector<double>> means;  // [rho][ell]
  std::vector<std::vector<double>> stderrs;
  std::vector<double> slopes;  // per rho
  bool pass = false;
};

/// Fitted exponent of E|two-block statistic| against l, per density. Block gap w = 7l.
inline AzumaReport azuma_canonical_check(Rng& rng, const std::vector<long>& ells,
                                         const std::vector<double>& rhos, long samples,
                                         double slope_tol = 0.1) {
  AzumaReport r;
  r.ells = ells;
  r.rhos = rhos;
  r.pass = true;
  for (double rho : rhos) {
    std::vector<double> m, se, lx, ly;
    for (long l : ells) {
      std::vector<double> v(samples);
      for (long i = 0; i < samples; ++i) v[i] = two_block_sample(rng, l, 7 * l, rho);
      m.push_back(mean(v));
      se.push_back(std_error(v));
      lx.push_back(std::log(static_cast<double>(l)));
      ly.push_back(std::log(m.back()));
    }
    double slope = fit_line(lx, ly).slope;
    r.means.push_back(m);
    r.stderrs.push_back(se);
    r.slopes.push_back(slope);
    r.pass = r.pass && std::abs(slope + 0.5) <= slope_tol;
  }
  return r;
}

}  // namespace slowbond

#endif
