#ifndef SLOWBOND_MODEL_HPP
#define SLOWBOND_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "slowbond/rng.hpp"

namespace slowbond {

/// Raised for any parameter, configuration or input that fails validation.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Periodic ring of odd size W with sites labelled -(W-1)/2 .. (W-1)/2.
/// Bond x joins site x and site x+1; bond (W-1)/2 is the wrap bond.
struct Ring {
  int W = 0;
  int half = 0;

  Ring() = default;
  explicit Ring(int window) : W(window), half((window - 1) / 2) {}

  int index(int x) const { return x + half; }
  int site(int i) const { return i - half; }
  bool contains(int x) const { return x >= -half && x <= half; }
  int next(int i) const { return i + 1 == W ? 0 : i + 1; }
  int prev(int i) const { return i == 0 ? W - 1 : i - 1; }
  int wrap(long i) const {
    long r = i % W;
    return static_cast<int>(r < 0 ? r + W : r);
  }
  /// Distance on the ring between two sites.
  int distance(int x, int y) const {
    int d = std::abs(x - y) % W;
    return std::min(d, W - d);
  }
};

struct RawParams {
  int N = 16;
  double beta_star = 0.0;
  double eps_star2 = 0.0;
  std::vector<int> slow_bonds;
  int window = 33;
  bool strict_mode = false;
  /// Mesoscopic exponent of the slow-bond region; defaults to 99 beta_star.
  std::optional<double> eps_star;
};

struct ModelParams {
  int N = 0;
  double beta_star = 0.0;
  double eps_star2 = 0.0;
  double eps_star = 0.0;
  std::vector<int> slow_bonds;  // sorted, ring coordinates
  int window = 0;
  bool strict_mode = false;
  std::vector<std::string> warnings;

  Ring ring() const { return Ring(window); }
};

inline ModelParams validate_params(const RawParams& raw) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(raw.beta_star) || !finite(raw.eps_star2) ||
      (raw.eps_star && !finite(*raw.eps_star)))
    throw ValidationError("parameters must be finite");
  if (raw.N < 2) throw ValidationError("N must be an integer >= 2");
  if (raw.beta_star < 0.0 || raw.beta_star > 0.5)
    throw ValidationError("beta_star must lie in [0, 1/2]");
  if (raw.eps_star2 < 0.0) throw ValidationError("eps_star2 must be >= 0");
  if (raw.window < 3) throw ValidationError("window must be >= 3");
  if (raw.window % 2 == 0) throw ValidationError("window must be odd");

  ModelParams p;
  p.N = raw.N;
  p.beta_star = raw.beta_star;
  p.eps_star2 = raw.eps_star2;
  p.eps_star = raw.eps_star.value_or(99.0 * raw.beta_star);
  p.window = raw.window;
  p.strict_mode = raw.strict_mode;

  Ring ring(raw.window);
  p.slow_bonds = raw.slow_bonds;
  std::sort(p.slow_bonds.begin(), p.slow_bonds.end());
  p.slow_bonds.erase(std::unique(p.slow_bonds.begin(), p.slow_bonds.end()),
                     p.slow_bonds.end());
  for (int b : p.slow_bonds)
    if (!ring.contains(b))
      throw ValidationError("slow bond " + std::to_string(b) + " lies outside the ring");
  double max_slow = std::ceil(std::pow(static_cast<double>(raw.N), raw.eps_star2) - 1e-12);
  if (static_cast<double>(p.slow_bonds.size()) > max_slow)
    throw ValidationError("too many slow bonds: at most ceil(N^eps_star2) = " +
                          std::to_string(static_cast<long>(max_slow)));

  // Asymptotic constraints: errors in strict mode, warnings otherwise.
  std::vector<std::string> issues;
  const double N = raw.N;
  if (p.eps_star < 99.0 * p.beta_star) issues.push_back("eps_star < 99 beta_star");
  if (p.eps_star2 > p.beta_star / 99.0) issues.push_back("eps_star2 > beta_star / 99");
  double reach = 0.5 * std::pow(N, 1.0 - p.eps_star);
  if (reach < 1.0)
    issues.push_back("slow-bond region [0, N^(1-eps_star)/2] has no room at this N (eps_star = " +
                     std::to_string(p.eps_star) + ")");
  for (int b : p.slow_bonds)
    if (b < 0 || b > reach) {
      issues.push_back("slow bond " + std::to_string(b) + " outside [0, N^(1-eps_star)/2]");
      break;
    }
  if (p.strict_mode && !issues.empty()) throw ValidationError("strict mode: " + issues.front());
  p.warnings = std::move(issues);
  return p;
}

/// How the per-site jump diffusivity of the Cole-Hopf field is chosen on slow bonds.
enum class Diffusivity {
  /// sqrt(pq) - N^2 abar_x: removes exactly the lost symmetric rate.
  Matched,
  /// sqrt(p_x q_x), the geometric mean of the local rates.
  GeometricMean,
  /// 1/2 a_x N^2 everywhere, the literal coefficient of the limiting operator.
  Literal,
};

inline const char* to_string(Diffusivity d) {
  switch (d) {
    case Diffusivity::Matched: return "matched";
    case Diffusivity::GeometricMean: return "geometric";
    case Diffusivity::Literal: return "literal";
  }
  return "?";
}

inline Diffusivity diffusivity_from_string(const std::string& s) {
  if (s == "matched") return Diffusivity::Matched;
  if (s == "geometric") return Diffusivity::GeometricMean;
  if (s == "literal") return Diffusivity::Literal;
  throw ValidationError("unknown diffusivity convention '" + s + "'");
}

struct DerivedConstants {
  int N = 0;
  double beta_star = 0.0;
  double lambda = 0.0;
  double nu = 0.0;
  double c_N = 0.0;
  double sym_normal = 0.0;  // 1/2 N^2
  double sym_slow = 0.0;    // 1/2 N^(2-beta)
  double asym = 0.0;        // 1/2 N^(3/2)
  double p_normal = 0.0, q_normal = 0.0, p_slow = 0.0, q_slow = 0.0;
  double D_bar = 0.0;  // diffusivity of the homogeneous kernel
  Diffusivity convention = Diffusivity::Matched;
  std::vector<char> slow;            // per ring index: is bond (x, x+1) slow
  std::vector<double> a_field;       // N^-beta on slow bonds, 1 elsewhere
  std::vector<double> abar_field;    // 1/2 - a/2
  std::vector<double> diffusivity;   // per-site jump rate of the kernel walk to each side

  double p_at(int i) const { return slow[i] ? p_slow : p_normal; }
  double q_at(int i) const { return slow[i] ? q_slow : q_normal; }
};

inline DerivedConstants derive_constants(const ModelParams& p,
                                         Diffusivity conv = Diffusivity::Matched) {
  DerivedConstants c;
  const double N = p.N;
  const double b = p.beta_star;
  c.N = p.N;
  c.beta_star = b;
  c.convention = conv;
  c.sym_normal = 0.5 * N * N;
  c.sym_slow = 0.5 * std::pow(N, 2.0 - b);
  c.asym = 0.5 * std::pow(N, 1.5);
  c.p_normal = c.sym_normal + c.asym;
  c.q_normal = c.sym_normal;
  c.p_slow = c.sym_slow + c.asym;
  c.q_slow = c.sym_slow;
  // p/q = 1 + N^{-1/2}; log1p keeps the small exponent accurate
  c.lambda = 0.5 * std::log1p(1.0 / std::sqrt(N));
  double sp = std::sqrt(c.p_normal), sq = std::sqrt(c.q_normal);
  c.nu = c.asym * c.asym / ((sp + sq) * (sp + sq));  // (sqrt p - sqrt q)^2
  c.c_N = N - std::pow(N, 1.0 - b);
  const double a_slow = std::pow(N, -b);

  Ring ring(p.window);
  c.slow.assign(p.window, 0);
  for (int s : p.slow_bonds) c.slow[ring.index(s)] = 1;
  c.a_field.assign(p.window, 1.0);
  c.abar_field.assign(p.window, 0.0);
  c.diffusivity.assign(p.window, 0.0);
  const double root_pq = sp * sq;
  c.D_bar = conv == Diffusivity::Literal ? 0.5 * N * N : root_pq;
  for (int i = 0; i < p.window; ++i) {
    if (c.slow[i]) {
      c.a_field[i] = a_slow;
      c.abar_field[i] = 0.5 - 0.5 * a_slow;
    }
    switch (conv) {
      case Diffusivity::Matched:
        c.diffusivity[i] = root_pq - N * N * c.abar_field[i];
        break;
      case Diffusivity::GeometricMean:
        c.diffusivity[i] = std::sqrt(c.p_at(i) * c.q_at(i));
        break;
      case Diffusivity::Literal:
        c.diffusivity[i] = 0.5 * N * N * c.a_field[i];
        break;
    }
  }
  return c;
}

struct ScaleSchedule {
  long ell_N = 1;
  long m_N = 1;
  double tau_N = 0.0;
  double tau_N_star = 0.0;
  long i_partial1_halfwidth = 1;
  double eps = 0.0;
  double delta = 0.0;
  double eps_partial1 = 0.0;
};

namespace detail {
// ceil that ignores representation noise just above an integer
inline long ceil_exact(double v) { return static_cast<long>(std::ceil(v * (1.0 - 1e-12))); }
}  // namespace detail

/// eps_partial1 defaults to 6 beta_star + delta.
inline ScaleSchedule build_schedule(const ModelParams& p, double eps, double delta,
                                    std::optional<double> eps_partial1 = {}) {
  if (!(eps > 0.0) || !(delta > 0.0)) throw ValidationError("eps and delta must be positive");
  const double N = p.N;
  const double b = p.beta_star;
  ScaleSchedule s;
  s.eps = eps;
  s.delta = delta;
  s.eps_partial1 = eps_partial1.value_or(6.0 * b + delta);
  s.ell_N = detail::ceil_exact(std::pow(N, 11.0 * b + eps));
  s.m_N = detail::ceil_exact(std::pow(N, 0.5 - 28.0 * b + eps));
  s.tau_N_star = std::pow(N, -2.0 + 31.0 * b);
  s.tau_N = std::exp(-2.0 * s.eps_partial1 * std::log(N) - 100.0 * std::log(std::log(N)));
  s.i_partial1_halfwidth = detail::ceil_exact(std::pow(N, 1.0 - s.eps_partial1));
  if (p.strict_mode && (s.m_N < 1 || s.ell_N > s.m_N))
    throw ValidationError("strict mode: need ell_N <= m_N (beta_star < 1/56)");
  return s;
}

struct SpinConfig {
  std::vector<std::int8_t> spins;

  SpinConfig() = default;
  explicit SpinConfig(std::vector<std::int8_t> s) : spins(std::move(s)) { validate(); }

  static SpinConfig from_ints(const std::vector<int>& v) {
    SpinConfig c;
    c.spins.reserve(v.size());
    for (int s : v) {
      if (s != 1 && s != -1) throw ValidationError("spins must be -1 or +1");
      c.spins.push_back(static_cast<std::int8_t>(s));
    }
    return c;
  }

  void validate() const {
    for (auto s : spins)
      if (s != 1 && s != -1) throw ValidationError("spins must be -1 or +1");
  }

  std::size_t size() const { return spins.size(); }
  long total() const { return std::accumulate(spins.begin(), spins.end(), 0L); }
  bool operator==(const SpinConfig&) const = default;
};

/// Inclusive range of ring sites.
struct Region {
  int first = 0;
  int last = -1;
  int size() const { return last - first + 1; }
};

inline SpinConfig sample_grand_canonical(Rng& rng, int n) {
  SpinConfig c;
  c.spins.resize(n);
  for (auto& s : c.spins) s = rng.coin() ? 1 : -1;
  return c;
}

inline SpinConfig sample_grand_canonical(Rng& rng, const Region& r) {
  return sample_grand_canonical(rng, r.size());
}

/// Number of plus spins on a canonical slice of n sites at density rho (ties to even).
inline long canonical_plus_count(int n, double rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw ValidationError("rho must lie in [-1, 1]");
  return static_cast<long>(std::nearbyint(n * (1.0 + rho) / 2.0));
}

inline SpinConfig sample_canonical(Rng& rng, int n, double rho) {
  long k = canonical_plus_count(n, rho);
  SpinConfig c;
  c.spins.assign(n, -1);
  std::fill(c.spins.begin(), c.spins.begin() + k, 1);
  for (int i = n - 1; i > 0; --i) std::swap(c.spins[i], c.spins[rng.below(i + 1)]);
  return c;
}

inline SpinConfig sample_canonical(Rng& rng, const Region& r, double rho) {
  return sample_canonical(rng, r.size(), rho);
}

/// First m sites of a canonical sample on n sites, drawn sequentially without replacement.
/// By exchangeability this is the law of any m fixed sites of the slice.
inline std::vector<std::int8_t> canonical_prefix(Rng& rng, int n, double rho, int m) {
  if (m > n) throw ValidationError("prefix longer than the canonical slice");
  long plus = canonical_plus_count(n, rho);
  long left = n;
  std::vector<std::int8_t> out(m);
  for (int i = 0; i < m; ++i, --left) {
    bool up = static_cast<long>(rng.below(static_cast<std::uint64_t>(left))) < plus;
    out[i] = up ? 1 : -1;
    if (up) --plus;
  }
  return out;
}

}  // namespace slowbond

#endif
