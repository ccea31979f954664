#ifndef SLOWBOND_HARNESS_HPP
#define SLOWBOND_HARNESS_HPP

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "slowbond/io.hpp"
#include "slowbond/rng.hpp"
#include "slowbond/stats.hpp"

namespace slowbond {

inline constexpr const char* kCodeVersion = "0.1.0";

/// Raised when a replica throws; `completed` counts replicas that finished.
class EnsembleError : public std::runtime_error {
 public:
  EnsembleError(const std::string& what, long completed)
      : std::runtime_error(what), completed(completed) {}
  long completed;
};

/// Runs f(i, rng_i) for i = 0..replicas-1 on a pool of workers. Replica i always gets
/// Rng(split_seed(master, i)) and its result lands in slot i, so the output does not
/// depend on the worker count or on scheduling.
template <class F>
auto orchestrate_ensemble(long replicas, std::uint64_t master, int workers, F&& f) {
  using R = decltype(f(0L, std::declval<Rng&>()));
  if (replicas < 1) throw ValidationError("replicas must be at least 1");
  std::vector<R> out(static_cast<std::size_t>(replicas));
  std::atomic<long> next{0}, done{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    while (!failed.load()) {
      long i = next.fetch_add(1);
      if (i >= replicas) return;
      try {
        Rng rng(split_seed(master, static_cast<std::uint64_t>(i)));
        out[static_cast<std::size_t>(i)] = f(i, rng);
        done.fetch_add(1);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  int w = std::max(1, std::min<int>(workers, static_cast<int>(std::min<long>(replicas, 1024))));
  if (w == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < w; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) {
    std::string what = "replica failed";
    try {
      std::rethrow_exception(error);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    throw EnsembleError(what + " (" + std::to_string(done.load()) + " of " + std::to_string(replicas) +
                            " replicas completed; results are partial)",
                        done.load());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Suite results

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteOutput {
  std::string suite;
  std::vector<Row> rows;               // estimates.csv
  std::map<std::string, Csv> files;    // further tables keyed by file name
  std::vector<Check> checks;
  std::vector<std::uint64_t> seeds;    // per-replica seeds, for the manifest

  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

inline const std::vector<std::string>& estimates_header() {
  static const std::vector<std::string> h{"name", "N", "beta_star", "value", "stderr", "bound", "pass"};
  return h;
}

inline Csv estimates_csv(const std::vector<Row>& rows) {
  Csv c(estimates_header());
  for (const auto& r : rows) c.row(r.name, r.N, r.beta_star, r.value, r.stderr_, r.bound, r.pass);
  return c;
}

/// Writes every table of a suite plus manifest.json into dir.
inline void write_outputs(const std::string& dir, const SuiteOutput& out, const RunConfig& cfg,
                          const std::string& command, double wall_seconds) {
  std::filesystem::create_directories(dir);
  std::map<std::string, Csv> files = out.files;
  files.emplace("estimates.csv", estimates_csv(out.rows));
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : out.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  nlohmann::json sums = nlohmann::json::object();
  for (const auto& [name, csv] : files) {
    std::string text = csv.str();
    std::ofstream f(dir + "/" + name, std::ios::binary);
    if (!f) throw IoError("cannot write " + dir + "/" + name);
    f << text;
    sums[name] = hex64(fnv1a(text));
  }
  nlohmann::json seeds = nlohmann::json::array();
  for (auto s : out.seeds) seeds.push_back(hex64(s));
  nlohmann::json m{{"code_version", kCodeVersion},
                   {"command", command},
                   {"suite", out.suite},
                   {"config", serialize_config(cfg)},
                   {"master_seed", cfg.seed},
                   {"replica_seeds", seeds},
                   {"wall_clock_seconds", wall_seconds},
                   {"checks", checks},
                   {"pass", out.pass()},
                   {"checksums_fnv1a64", sums}};
  std::ofstream f(dir + "/manifest.json", std::ios::binary);
  if (!f) throw IoError("cannot write " + dir + "/manifest.json");
  f << m.dump(2) << "\n";
}

/// The run config stored in a manifest.
inline RunConfig config_from_manifest(const std::string& path) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad manifest " + path + ": " + e.what());
  }
  if (!m.contains("config") || !m["config"].is_string()) throw IoError("manifest has no config: " + path);
  return parse_config(m["config"].get<std::string>());
}

// ---------------------------------------------------------------------------
// Report: pooled statistics across run directories

struct Pooled {
  double value = 0.0;
  double stderr_ = 0.0;
  double bound = 0.0;
  bool pass = true;
};

/// Merges estimates.csv rows from several run directories by (name, N, beta_star).
/// Rows with positive stderr are pooled by inverse-variance weighting; otherwise the
/// plain mean is taken. Pass is recomputed as value <= bound; bounds must agree.
inline Csv report(const std::vector<std::string>& dirs) {
  if (dirs.empty()) throw ValidationError("report needs at least one run directory");
  struct Acc {
    std::vector<double> v, se;
    double bound = 0.0;
    bool bound_set = false;
  };
  std::map<std::tuple<std::string, int, double>, Acc> acc;
  std::vector<std::tuple<std::string, int, double>> order;
  for (const auto& d : dirs) {
    Csv c = Csv::read(d + "/estimates.csv");
    if (c.header() != estimates_header()) throw IoError("schema mismatch in " + d + "/estimates.csv");
    for (const auto& r : c.rows()) {
      auto key = std::make_tuple(r[0], static_cast<int>(toml_int(r[1])), toml_real(r[2]));
      auto [it, fresh] = acc.try_emplace(key);
      if (fresh) order.push_back(key);
      Acc& a = it->second;
      a.v.push_back(toml_real(r[3]));
      a.se.push_back(toml_real(r[4]));
      double b = toml_real(r[5]);
      if (a.bound_set && !(b == a.bound || (std::isnan(b) && std::isnan(a.bound))))
        throw IoError("rows for " + r[0] + " disagree on the bound");
      a.bound = b;
      a.bound_set = true;
    }
  }
  Csv out(estimates_header());
  for (const auto& key : order) {
    const Acc& a = acc[key];
    bool weighted = std::all_of(a.se.begin(), a.se.end(), [](double s) { return s > 0.0; });
    double v = 0.0, se = 0.0;
    if (weighted) {
      double wsum = 0.0;
      for (std::size_t i = 0; i < a.v.size(); ++i) {
        double w = 1.0 / (a.se[i] * a.se[i]);
        v += w * a.v[i];
        wsum += w;
      }
      v /= wsum;
      se = 1.0 / std::sqrt(wsum);
    } else {
      v = mean(a.v);
      double s2 = 0.0;
      for (double s : a.se) s2 += s * s;
      se = std::sqrt(s2) / static_cast<double>(a.se.size());
    }
    out.row(std::get<0>(key), std::get<1>(key), std::get<2>(key), v, se, a.bound, v <= a.bound);
  }
  return out;
}

/// Seconds since `start`.
inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace slowbond

#endif
