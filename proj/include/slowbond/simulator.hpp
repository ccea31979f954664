#ifndef SLOWBOND_SIMULATOR_HPP
#define SLOWBOND_SIMULATOR_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slowbond/model.hpp"
#include "slowbond/rng.hpp"

namespace slowbond {

/// Left: the particle at x+1 moves to the hole at x. Right: the particle at x moves to x+1.
/// Spin +1 is a particle and -1 a hole.
enum class Dir : std::int8_t { Left = 1, Right = -1 };

struct Event {
  double time = 0.0;
  std::int32_t bond = 0;  // ring index of the left site
  Dir dir = Dir::Left;
  bool operator==(const Event&) const = default;
};

struct EventLog {
  std::vector<Event> events;
  double horizon = 0.0;
  bool truncated = false;
};

/// Spins and the net leftward flux across bond (0,1) on a grid of times.
struct TrajectorySample {
  std::vector<double> times;
  std::vector<SpinConfig> spins;
  std::vector<long> flux;
};

enum class InitKind { NarrowWedge, BernoulliHalf, Explicit };

inline InitKind init_kind_from_string(const std::string& s) {
  if (s == "narrow_wedge") return InitKind::NarrowWedge;
  if (s == "bernoulli_half") return InitKind::BernoulliHalf;
  if (s == "explicit") return InitKind::Explicit;
  throw ValidationError("unknown init kind '" + s + "'");
}

inline SpinConfig init_config(InitKind kind, const Ring& ring, Rng& rng,
                              const std::vector<int>& explicit_spins = {}) {
  switch (kind) {
    case InitKind::NarrowWedge: {
      SpinConfig c;
      c.spins.resize(ring.W);
      for (int i = 0; i < ring.W; ++i) c.spins[i] = ring.site(i) >= 0 ? 1 : -1;
      return c;
    }
    case InitKind::BernoulliHalf:
      return sample_grand_canonical(rng, ring.W);
    case InitKind::Explicit: {
      if (static_cast<int>(explicit_spins.size()) != ring.W)
        throw ValidationError("explicit configuration has the wrong length");
      return SpinConfig::from_ints(explicit_spins);
    }
  }
  throw ValidationError("bad init kind");
}

/// Sum over bonds of the currently feasible exchange rates, by direct enumeration.
inline double event_rate_total(const SpinConfig& c, const DerivedConstants& k,
                               bool asymmetry = true) {
  const int W = static_cast<int>(c.size());
  double total = 0.0;
  for (int i = 0; i < W; ++i) {
    int u = c.spins[i], v = c.spins[i + 1 == W ? 0 : i + 1];
    double sym = k.slow[i] ? k.sym_slow : k.sym_normal;
    if (u == -1 && v == 1) total += sym + (asymmetry ? k.asym : 0.0);
    if (u == 1 && v == -1) total += sym;
  }
  return total;
}

namespace detail {

/// Set of small integers with O(1) insert, erase and uniform pick.
class IndexSet {
 public:
  explicit IndexSet(int capacity = 0) : pos_(capacity, -1) {}
  void insert(int v) {
    if (pos_[v] >= 0) return;
    pos_[v] = static_cast<int>(items_.size());
    items_.push_back(v);
  }
  void erase(int v) {
    int p = pos_[v];
    if (p < 0) return;
    int last = items_.back();
    items_[p] = last;
    pos_[last] = p;
    items_.pop_back();
    pos_[v] = -1;
  }
  bool contains(int v) const { return pos_[v] >= 0; }
  std::size_t size() const { return items_.size(); }
  int operator[](std::size_t k) const { return items_[k]; }

 private:
  std::vector<int> items_;
  std::vector<int> pos_;
};

// Kahan-compensated running sum.
struct CompensatedTime {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

}  // namespace detail

/// Kinetic Monte Carlo state machine. Feasible exchanges are grouped into three
/// classes of equal rate: symmetric on normal bonds, symmetric on slow bonds, and
/// the leftward asymmetric part on (-,+) bonds.
class Simulator {
 public:
  Simulator(const DerivedConstants& k, SpinConfig init, bool asymmetry = true)
      : k_(k),
        ring_(static_cast<int>(init.size())),
        config_(std::move(init)),
        asymmetry_(asymmetry),
        sym_normal_(ring_.W),
        sym_slow_(ring_.W),
        asym_(ring_.W) {
    config_.validate();
    if (static_cast<int>(k.slow.size()) != ring_.W)
      throw ValidationError("configuration length does not match the window");
    for (int i = 0; i < ring_.W; ++i) classify(i);
  }

  double time() const { return clock_.sum; }
  long flux() const { return flux_; }
  const SpinConfig& config() const { return config_; }
  long event_count() const { return events_; }

  double total_rate() const {
    return static_cast<double>(sym_normal_.size()) * k_.sym_normal +
           static_cast<double>(sym_slow_.size()) * k_.sym_slow +
           (asymmetry_ ? static_cast<double>(asym_.size()) * k_.asym : 0.0);
  }

  /// Draws the next event. If it would fall after t_max, the clock is set to t_max
  /// and nothing happens.
  std::optional<Event> step(Rng& rng, double t_max) {
    double total = total_rate();
    if (total <= 0.0) {
      clock_ = {t_max, 0.0};
      return std::nullopt;
    }
    double wait = rng.exponential(total);
    if (clock_.sum + wait > t_max) {
      clock_ = {t_max, 0.0};
      return std::nullopt;
    }
    clock_.add(wait);
    double u = rng.uniform() * total;
    double w_normal = static_cast<double>(sym_normal_.size()) * k_.sym_normal;
    double w_slow = static_cast<double>(sym_slow_.size()) * k_.sym_slow;
    int bond;
    if (u < w_normal) {
      bond = sym_normal_[rng.below(sym_normal_.size())];
    } else if (u < w_normal + w_slow || asym_.size() == 0) {
      bond = sym_slow_.size() ? sym_slow_[rng.below(sym_slow_.size())]
                              : sym_normal_[rng.below(sym_normal_.size())];
    } else {
      bond = asym_[rng.below(asym_.size())];
    }
    Dir d = config_.spins[bond] == -1 ? Dir::Left : Dir::Right;
    apply(bond, d);
    return Event{clock_.sum, bond, d};
  }

  /// Graphical-construction step: a uniform bond is proposed at total rate W * p_normal
  /// and accepted with probability (its rate for the current pattern) / p_normal.
  std::optional<Event> propose(Rng& rng, double t_max) {
    const double cap = asymmetry_ ? k_.p_normal : k_.sym_normal;
    const double total = cap * ring_.W;
    while (true) {
      double wait = rng.exponential(total);
      if (clock_.sum + wait > t_max) {
        clock_ = {t_max, 0.0};
        return std::nullopt;
      }
      clock_.add(wait);
      int bond = static_cast<int>(rng.below(static_cast<std::uint64_t>(ring_.W)));
      double u = rng.uniform() * cap;
      int a = config_.spins[bond], b = config_.spins[ring_.next(bond)];
      if (a == b) continue;
      Dir d = a == -1 ? Dir::Left : Dir::Right;
      double sym = k_.slow[bond] ? k_.sym_slow : k_.sym_normal;
      double rate = sym + (asymmetry_ && d == Dir::Left ? k_.asym : 0.0);
      if (u >= rate) continue;
      apply(bond, d);
      return Event{clock_.sum, bond, d};
    }
  }

  /// Applies an exchange; throws if it is not feasible.
  void apply(int bond, Dir d) {
    int j = ring_.next(bond);
    auto& s = config_.spins;
    bool ok = d == Dir::Left ? (s[bond] == -1 && s[j] == 1) : (s[bond] == 1 && s[j] == -1);
    if (!ok) throw ValidationError("infeasible exchange at bond index " + std::to_string(bond));
    std::swap(s[bond], s[j]);
    if (bond == ring_.index(0)) flux_ += d == Dir::Left ? 1 : -1;
    ++events_;
    classify(ring_.prev(bond));
    classify(bond);
    classify(j);
  }

 private:
  void classify(int i) {
    int u = config_.spins[i], v = config_.spins[ring_.next(i)];
    bool discordant = u != v;
    auto& sym = k_.slow[i] ? sym_slow_ : sym_normal_;
    if (discordant) sym.insert(i); else sym.erase(i);
    if (u == -1 && v == 1) asym_.insert(i); else asym_.erase(i);
  }

  const DerivedConstants& k_;
  Ring ring_;
  SpinConfig config_;
  bool asymmetry_;
  detail::IndexSet sym_normal_, sym_slow_, asym_;
  detail::CompensatedTime clock_;
  long flux_ = 0;
  long events_ = 0;
};

enum class Sampler { Direct, Graphical };

struct RunOptions {
  double t_final = 1.0;
  double snapshot_dt = 0.1;
  long max_events = 200'000'000;
  bool record_log = true;
  bool asymmetry = true;
  /// Direct draws only feasible events. Graphical proposes every bond at the normal
  /// leftward rate and thins; two runs with equal seeds and different slow-bond strengths
  /// then share all proposals and differ only through rejections at slow bonds.
  Sampler sampler = Sampler::Direct;
};

struct RunResult {
  TrajectorySample traj;
  EventLog log;
  SpinConfig initial;
  long n_events = 0;
};

/// Snapshot grid k*dt for k = 0, 1, ... up to t_final.
inline std::vector<double> snapshot_grid(double t_final, double dt) {
  if (!(t_final > 0.0) || !(dt > 0.0)) throw ValidationError("t_final and snapshot_dt must be positive");
  auto n = static_cast<long>(std::floor(t_final / dt * (1.0 + 1e-12)));
  std::vector<double> g(n + 1);
  for (long i = 0; i <= n; ++i) g[i] = static_cast<double>(i) * dt;
  return g;
}

inline RunResult run(const SpinConfig& init, const DerivedConstants& k, const RunOptions& opt,
                     Rng& rng) {
  RunResult out;
  out.initial = init;
  Simulator sim(k, init, opt.asymmetry);
  auto grid = snapshot_grid(opt.t_final, opt.snapshot_dt);
  out.traj.times = grid;
  out.log.horizon = opt.t_final;
  std::size_t next = 0;
  auto snap = [&] {
    out.traj.spins.push_back(sim.config());
    out.traj.flux.push_back(sim.flux());
    ++next;
  };
  while (next < grid.size()) {
    double target = grid[next];
    while (true) {
      if (sim.event_count() >= opt.max_events) {
        out.log.truncated = true;
        break;
      }
      auto ev = opt.sampler == Sampler::Graphical ? sim.propose(rng, target) : sim.step(rng, target);
      if (!ev) break;
      if (opt.record_log) out.log.events.push_back(*ev);
    }
    if (out.log.truncated) break;
    snap();
  }
  out.traj.times.resize(out.traj.spins.size());
  out.n_events = sim.event_count();
  return out;
}

/// Rebuilds snapshots by applying a log to the initial configuration.
inline TrajectorySample replay(const SpinConfig& init, const EventLog& log,
                               const DerivedConstants& k, const std::vector<double>& times) {
  Simulator sim(k, init);
  TrajectorySample t;
  t.times = times;
  std::size_t e = 0;
  for (double s : times) {
    while (e < log.events.size() && log.events[e].time <= s) {
      sim.apply(log.events[e].bond, log.events[e].dir);
      ++e;
    }
    t.spins.push_back(sim.config());
    t.flux.push_back(sim.flux());
  }
  return t;
}

struct JumpAudit {
  long max_block_count = 0;
  double cap = 0.0;
  long blocks = 0;
  bool pass = true;
};

/// Largest number of exchanges across one bond inside one block of length T_f / N^2,
/// compared with the cap c log N.
inline JumpAudit jump_size_audit(const EventLog& log, int N, int window, double cap_constant = 10.0) {
  JumpAudit a;
  a.blocks = static_cast<long>(N) * N;
  a.cap = cap_constant * std::log(static_cast<double>(N));
  double block = log.horizon / static_cast<double>(a.blocks);
  std::vector<long> counts(window, 0);
  std::vector<int> touched;
  long current = -1;
  for (const auto& ev : log.events) {
    long b = block > 0 ? static_cast<long>(ev.time / block) : 0;
    if (b != current) {
      for (int i : touched) counts[i] = 0;
      touched.clear();
      current = b;
    }
    if (counts[ev.bond]++ == 0) touched.push_back(ev.bond);
    a.max_block_count = std::max(a.max_block_count, counts[ev.bond]);
  }
  a.pass = static_cast<double>(a.max_block_count) <= a.cap;
  return a;
}

}  // namespace slowbond

#endif
