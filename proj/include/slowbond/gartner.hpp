#ifndef SLOWBOND_GARTNER_HPP
#define SLOWBOND_GARTNER_HPP

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "slowbond/field.hpp"
#include "slowbond/model.hpp"
#include "slowbond/simulator.hpp"
#include "slowbond/stats.hpp"

namespace slowbond {

/// Height function and Cole-Hopf transform Z = exp(-h + nu T) on the snapshot grid.
struct CHField {
  Field h;
  Field Z;
  double lambda = 0.0;
  double nu = 0.0;
};

/// Height at one snapshot: h_0 = 2 lambda flux, increments h_x - h_{x-1} = lambda eta_x
/// along the arc from -(W-1)/2 to (W-1)/2.
inline void fill_height(const SpinConfig& c, long flux, double lambda, double* h) {
  Ring ring(static_cast<int>(c.size()));
  int o = ring.index(0);
  h[o] = 2.0 * lambda * static_cast<double>(flux);
  for (int i = o + 1; i < ring.W; ++i) h[i] = h[i - 1] + lambda * c.spins[i];
  for (int i = o - 1; i >= 0; --i) h[i] = h[i + 1] - lambda * c.spins[i + 1];
}

inline CHField build_ch_field(const TrajectorySample& traj, const DerivedConstants& k) {
  if (traj.spins.empty()) throw ValidationError("empty trajectory");
  int W = static_cast<int>(traj.spins.front().size());
  CHField f;
  f.lambda = k.lambda;
  f.nu = k.nu;
  f.h = Field(traj.times, W);
  f.Z = Field(traj.times, W);
  for (std::size_t t = 0; t < traj.times.size(); ++t) {
    fill_height(traj.spins[t], traj.flux[t], k.lambda, f.h.row(t));
    for (int i = 0; i < W; ++i) f.Z(t, i) = std::exp(-f.h(t, i) + k.nu * traj.times[t]);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Generator residual

using Real50 = boost::multiprecision::cpp_bin_float_50;

/// Residual of the Cole-Hopf drift for the four local patterns (u, v) = (eta_x, eta_{x+1}),
/// indexed by pattern_index.
struct ResidualDecomposition {
  int N = 0;
  double beta_star = 0.0;
  Diffusivity convention = Diffusivity::Matched;
  std::array<Real50, 4> normal{};  // vanishes identically
  std::array<Real50, 4> slow{};
  Real50 C_N = 0;
  std::array<double, 4> Q_emp{};
  std::array<double, 4> qtilde{};
  std::vector<int> slow_bonds;
  double max_abs_normal = 0.0;
  double max_abs_qtilde = 0.0;
  double scale_ratio = 0.0;  // C_N / (N - N^{1-beta}) when beta > 0

  static constexpr std::array<std::array<int, 2>, 4> patterns{{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
  static int pattern_index(int u, int v) { return (u == 1 ? 0 : 2) + (v == 1 ? 0 : 1); }

  double R_slow(int u, int v) const { return static_cast<double>(slow[pattern_index(u, v)]); }
};

namespace detail {

inline std::array<Real50, 4> four_case_residual(const Real50& p_b, const Real50& q_b,
                                                const Real50& D, const Real50& lambda,
                                                const Real50& nu) {
  using boost::multiprecision::exp;
  std::array<Real50, 4> r;
  for (int k = 0; k < 4; ++k) {
    int u = ResidualDecomposition::patterns[k][0], v = ResidualDecomposition::patterns[k][1];
    Real50 jump = 0;
    if (u == -1 && v == 1) jump = p_b * (exp(-2 * lambda) - 1);
    if (u == 1 && v == -1) jump = q_b * (exp(2 * lambda) - 1);
    r[k] = jump + nu - D * (exp(-lambda * v) + exp(lambda * u) - 2);
  }
  return r;
}

}  // namespace detail

/// Exact residual in 50-digit arithmetic. Throws if the residual on a normal bond
/// exceeds 1e-20 N^2, which happens for the literal convention.
inline ResidualDecomposition residual_decomposition(const ModelParams& p,
                                                    Diffusivity conv = Diffusivity::Matched) {
  using boost::multiprecision::log;
  using boost::multiprecision::pow;
  using boost::multiprecision::sqrt;
  ResidualDecomposition out;
  out.N = p.N;
  out.beta_star = p.beta_star;
  out.convention = conv;
  out.slow_bonds = p.slow_bonds;

  const Real50 N = p.N;
  const Real50 beta = p.beta_star;
  const Real50 half = Real50(1) / 2;
  const Real50 asym = half * pow(N, Real50(3) / 2);
  const Real50 p_n = half * N * N + asym, q_n = half * N * N;
  const Real50 sym_s = half * pow(N, 2 - beta);
  const Real50 p_s = sym_s + asym, q_s = sym_s;
  const Real50 lambda = half * log(p_n / q_n);
  const Real50 root = sqrt(p_n * q_n);
  const Real50 nu = p_n + q_n - 2 * root;
  const Real50 a_s = pow(N, -beta);
  const Real50 abar_s = half - half * a_s;

  Real50 D_n, D_s;
  switch (conv) {
    case Diffusivity::Matched:
      D_n = root;
      D_s = root - N * N * abar_s;
      break;
    case Diffusivity::GeometricMean:
      D_n = root;
      D_s = sqrt(p_s * q_s);
      break;
    case Diffusivity::Literal:
      D_n = half * N * N;
      D_s = half * N * N * a_s;
      break;
  }
  out.normal = detail::four_case_residual(p_n, q_n, D_n, lambda, nu);
  out.slow = detail::four_case_residual(p_s, q_s, D_s, lambda, nu);

  const Real50 tol = Real50("1e-20") * N * N;
  for (const auto& r : out.normal) {
    out.max_abs_normal = std::max(out.max_abs_normal, static_cast<double>(abs(r)));
    if (abs(r) > tol)
      throw ValidationError("non-slow residual does not vanish under the '" +
                            std::string(to_string(conv)) + "' convention");
  }

  out.C_N = (out.slow[ResidualDecomposition::pattern_index(1, 1)] +
             out.slow[ResidualDecomposition::pattern_index(-1, -1)]) / 2;
  // at beta = 0 the slow bond is a normal bond and C_N is rounding noise
  if (abs(out.C_N) <= tol) out.C_N = 0;
  const Real50 sqrtN = sqrt(N);
  for (int k = 0; k < 4; ++k) {
    if (out.C_N == 0) continue;
    int uv = ResidualDecomposition::patterns[k][0] * ResidualDecomposition::patterns[k][1];
    Real50 Q = out.slow[k] / out.C_N;
    out.Q_emp[k] = static_cast<double>(Q);
    out.qtilde[k] = static_cast<double>(sqrtN * (Q - uv));
    out.max_abs_qtilde = std::max(out.max_abs_qtilde, std::abs(out.qtilde[k]));
  }
  if (p.beta_star > 0)
    out.scale_ratio = static_cast<double>(out.C_N / (N - pow(N, 1 - beta)));
  return out;
}

// ---------------------------------------------------------------------------
// Compensated noise

struct NoiseMark {
  double time = 0.0;
  int site = 0;  // ring index
  double mark = 0.0;
};

/// Jump marks of Z and the rule for the compensator intensity.
struct CompensatedNoise {
  std::vector<NoiseMark> marks;
  double lambda = 0.0;
  double nu = 0.0;
  double mark_left = 0.0;   // e^{-2 lambda} - 1
  double mark_right = 0.0;  // e^{2 lambda} - 1

  /// r_x = p_x 1{(-,+)} mark_left + q_x 1{(+,-)} mark_right.
  double intensity(const SpinConfig& c, const DerivedConstants& k, int i, bool asymmetry = true) const {
    int W = static_cast<int>(c.size());
    int u = c.spins[i], v = c.spins[i + 1 == W ? 0 : i + 1];
    double sym = k.slow[i] ? k.sym_slow : k.sym_normal;
    if (u == -1 && v == 1) return (sym + (asymmetry ? k.asym : 0.0)) * mark_left;
    if (u == 1 && v == -1) return sym * mark_right;
    return 0.0;
  }
};

inline CompensatedNoise noise_rule(const DerivedConstants& k) {
  CompensatedNoise n;
  n.lambda = k.lambda;
  n.nu = k.nu;
  n.mark_left = std::expm1(-2.0 * k.lambda);
  n.mark_right = std::expm1(2.0 * k.lambda);
  return n;
}

/// Marks of every event, checked against Z on the snapshot grid: between snapshots
/// Z_T = Z_S exp(nu (T - S)) prod (1 + mark). Throws on a relative mismatch above 1e-9.
inline CompensatedNoise extract_noise(const EventLog& log, const CHField& ch) {
  CompensatedNoise n;
  n.lambda = ch.lambda;
  n.nu = ch.nu;
  n.mark_left = std::expm1(-2.0 * ch.lambda);
  n.mark_right = std::expm1(2.0 * ch.lambda);
  n.marks.reserve(log.events.size());
  for (const auto& e : log.events)
    n.marks.push_back({e.time, e.bond, e.dir == Dir::Left ? n.mark_left : n.mark_right});

  const int W = ch.Z.W;
  std::vector<double> z(ch.Z.row(0), ch.Z.row(0) + W);
  std::size_t e = 0;
  double t0 = ch.Z.times[0];
  for (std::size_t t = 0; t < ch.Z.nt(); ++t) {
    double T = ch.Z.times[t];
    while (e < n.marks.size() && n.marks[e].time <= T) {
      z[n.marks[e].site] *= 1.0 + n.marks[e].mark;
      ++e;
    }
    double drift = std::exp(ch.nu * (T - t0));
    for (int i = 0; i < W; ++i) {
      double pred = z[i] * drift;
      if (std::abs(pred - ch.Z(t, i)) > 1e-9 * ch.Z(t, i))
        throw ValidationError("noise replay does not reproduce Z at snapshot " + std::to_string(t));
    }
  }
  return n;
}

/// Stochastic integral int_0^T Z_{s-} d xi_{s,x} at every snapshot time and site, with
/// xi the compensated jump martingale. The compensator part is integrated exactly using
/// the deterministic exp(nu t) growth of Z between events.
inline Field noise_integral(const SpinConfig& init, const EventLog& log, const DerivedConstants& k,
                            const std::vector<double>& times) {
  const int W = static_cast<int>(init.size());
  Ring ring(W);
  CompensatedNoise rule = noise_rule(k);
  SpinConfig c = init;
  std::vector<double> h(W);
  fill_height(c, 0, k.lambda, h.data());
  std::vector<double> z(W), r(W), last(W, 0.0), integral(W, 0.0);
  for (int i = 0; i < W; ++i) {
    z[i] = std::exp(-h[i]);
    r[i] = rule.intensity(c, k, i);
  }
  auto advance = [&](int i, double t) {
    double dt = t - last[i];
    if (dt <= 0.0) return;
    double g = std::expm1(k.nu * dt);
    integral[i] -= r[i] * z[i] * g / k.nu;
    z[i] *= 1.0 + g;
    last[i] = t;
  };
  Field out(times, W);
  std::size_t e = 0;
  for (std::size_t s = 0; s < times.size(); ++s) {
    while (e < log.events.size() && log.events[e].time <= times[s]) {
      const auto& ev = log.events[e++];
      int i = ev.bond, j = ring.next(i), b = ring.prev(i);
      advance(b, ev.time);
      advance(i, ev.time);
      advance(j, ev.time);
      double m = ev.dir == Dir::Left ? rule.mark_left : rule.mark_right;
      integral[i] += z[i] * m;
      z[i] *= 1.0 + m;
      std::swap(c.spins[i], c.spins[j]);
      r[b] = rule.intensity(c, k, b);
      r[i] = rule.intensity(c, k, i);
      r[j] = rule.intensity(c, k, j);
    }
    for (int i = 0; i < W; ++i) {
      advance(i, times[s]);
      out(s, i) = integral[i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Regularity statistics of Z

struct RegularityReport {
  std::vector<Row> rows;
  double time_violation_fraction = 0.0;
};

/// (i) time increments over tau_N_star relative to Z against N^{3/2+eps} tau_N_star;
/// (ii) sqrt(T) |grad_k Z| for k <= m_N against N^eps c_N (1 + |Z|^{1+eps});
/// (iii) the block-averaged spin times Z against its log-expansion bound, which is
/// N^{1/2+eps} m^{-1} |grad_m Z| up to the constant (1 + lambda m) / (lambda N^{1/2+eps}).
inline RegularityReport z_regularity_stats(const CHField& ch, const TrajectorySample& traj,
                                           const ScaleSchedule& s, int N, double beta) {
  RegularityReport rep;
  const Field& Z = ch.Z;
  const int W = Z.W;
  const double Nd = N, eps = s.eps;
  const std::size_t nt = Z.nt();
  if (nt < 2) throw ValidationError("need at least two snapshots");
  const double dt = Z.times[1] - Z.times[0];
  const double tau = s.tau_N_star;
  auto lag = static_cast<std::size_t>(std::llround(tau / dt));
  if (lag == 0 || std::abs(static_cast<double>(lag) * dt - tau) > 1e-9 * tau)
    throw ValidationError("snapshot spacing does not resolve tau_N_star");

  // (i)
  double bound_i = std::pow(Nd, 1.5 + eps) * tau;
  double sup_i = 0.0;
  long viol = 0, count = 0;
  for (std::size_t t = 0; t + lag < nt; ++t)
    for (int i = 0; i < W; ++i) {
      double v = std::abs(Z(t + lag, i) - Z(t, i)) / Z(t, i);
      sup_i = std::max(sup_i, v);
      viol += v > bound_i;
      ++count;
    }
  rep.time_violation_fraction = count ? static_cast<double>(viol) / static_cast<double>(count) : 0.0;
  rep.rows.push_back(make_row("z_time_increment_sup", N, beta, sup_i, bound_i));
  rep.rows.push_back(make_row("z_time_violation_fraction", N, beta, rep.time_violation_fraction, 1e-2));

  // (ii)
  const double m = static_cast<double>(s.m_N);
  double c_N = std::pow(Nd, -0.5 + 32 * beta) + std::pow(Nd, -0.5 + 2 * beta + eps) * std::sqrt(m) +
               std::pow(Nd, -46 * beta + eps) + std::pow(Nd, -0.25 + 16 * beta);
  double zsup = weighted_sup_norm(Z, N, 0.0);
  double bound_ii = std::pow(Nd, eps) * c_N * (1.0 + std::pow(zsup, 1.0 + eps));
  double sup_ii = 0.0;
  for (std::size_t t = 1; t < nt; ++t) {
    double w = std::sqrt(Z.times[t]);
    for (long kk = 1; kk <= s.m_N; ++kk)
      for (int i = 0; i + kk < W; ++i) sup_ii = std::max(sup_ii, w * std::abs(Z(t, i + kk) - Z(t, i)));
  }
  rep.rows.push_back(make_row("z_space_gradient_sup", N, beta, sup_ii, bound_ii));

  // (iii): block mean spin times Z, and its exact relation to the height increment
  double sup_iii = 0.0, identity_err = 0.0, pointwise = 0.0;
  const long mN = s.m_N;
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& sp = traj.spins[t].spins;
    for (int i = 0; i + mN < W; ++i) {
      long sum = 0;
      for (long w = 1; w <= mN; ++w) sum += sp[i + w];
      double block = std::abs(static_cast<double>(sum)) / m;
      double from_h = std::abs(ch.h(t, i + mN) - ch.h(t, i)) / (ch.lambda * m);
      identity_err = std::max(identity_err, std::abs(block - from_h));
      double val = block * Z(t, i);
      if (t > 0) sup_iii = std::max(sup_iii, std::sqrt(Z.times[t]) * val);
      // val = |log(1 + g)| / (lambda m) Z with g = grad_m Z / Z, hence val <= (1 + lambda m)
      // |grad_m Z| / (lambda m)
      double grad = std::abs(Z(t, i + mN) - Z(t, i)) / (ch.lambda * m);
      if (val > 0.0) pointwise = std::max(pointwise, val / grad);
    }
  }
  double bound_iii = std::pow(Nd, 0.5 + eps) / m * c_N * (1.0 + std::pow(zsup, 1.0 + eps));
  rep.rows.push_back(make_row("z_block_spin_sup", N, beta, sup_iii, bound_iii));
  rep.rows.push_back(make_row("z_block_spin_pointwise_ratio", N, beta, pointwise,
                              1.0 + ch.lambda * m + 1e-12));
  rep.rows.push_back(make_row("z_block_height_identity", N, beta, identity_err, 1e-9));
  return rep;
}

}  // namespace slowbond

#endif
