// Command-line front end: simulate | heatkernel | verify <suite> | compare | report.
// Exit status 0 on success, 1 on invalid input or I/O failure, 2 when a suite fails.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slowbond/slowbond.hpp"

using namespace slowbond;

namespace {

struct Overrides {
  std::string config;
  std::optional<int> N;
  std::optional<double> beta_star;
  std::optional<double> eps_star2;
  std::optional<std::vector<int>> slow_bonds;
  bool strict = false;
  std::optional<std::string> convention;
  std::optional<int> window;
  std::optional<double> t_final;
  std::optional<double> snapshot_dt;
  std::optional<long> replicas;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> sampler;
  std::optional<std::string> init;
  std::optional<std::string> method;
  std::optional<std::string> out;
  bool events = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "config file (.toml) or manifest.json of an earlier run");
  app->add_option("--N", o.N, "scale parameter N");
  app->add_option("--beta-star", o.beta_star, "slow-bond exponent in [0, 1/2]");
  app->add_option("--eps-star2", o.eps_star2, "exponent bounding the number of slow bonds");
  app->add_option("--slow-bonds", o.slow_bonds, "slow bond sites");
  app->add_flag("--strict", o.strict, "enforce the asymptotic parameter constraints");
  app->add_option("--convention", o.convention, "diffusivity convention: matched | geometric | literal");
  app->add_option("--window", o.window, "ring size W (odd)");
  app->add_option("--t-final", o.t_final, "final time");
  app->add_option("--snapshot-dt", o.snapshot_dt, "snapshot spacing");
  app->add_option("--replicas", o.replicas, "number of replicas");
  app->add_option("--seed", o.seed, "64-bit master seed");
  app->add_option("--workers", o.workers, "worker threads");
  app->add_option("--sampler", o.sampler, "direct | graphical");
  app->add_option("--init", o.init, "narrow_wedge | bernoulli_half");
  app->add_option("--method", o.method, "kernel method: uniformization | expm | ode");
  app->add_option("--out", o.out, "output directory");
}

RunConfig build_config(const Overrides& o) {
  RunConfig c;
  if (!o.config.empty()) {
    bool manifest = o.config.size() >= 5 && o.config.substr(o.config.size() - 5) == ".json";
    c = manifest ? config_from_manifest(o.config) : load_config(o.config);
  }
  if (o.N) {
    c.N = *o.N;
    c.sweep_N = {*o.N};
  }
  if (o.beta_star) {
    c.beta_star = *o.beta_star;
    c.sweep_beta = {*o.beta_star};
  }
  if (o.eps_star2) c.eps_star2 = *o.eps_star2;
  if (o.slow_bonds) c.slow_bonds = *o.slow_bonds;
  if (o.strict) c.strict_mode = true;
  if (o.convention) c.convention = *o.convention;
  if (o.window) {
    c.window = c.kernel_window = c.sweep_window = *o.window;
  }
  if (o.t_final) c.t_final = *o.t_final;
  if (o.snapshot_dt) c.snapshot_dt = *o.snapshot_dt;
  if (o.replicas) {
    c.replicas = static_cast<int>(*o.replicas);
    c.sweep_replicas = *o.replicas;
  }
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (o.sampler) c.sampler = *o.sampler;
  if (o.init) c.init_kind = *o.init;
  if (o.method) c.kernel_method = *o.method;
  if (o.out) c.output_dir = *o.out;
  if (c.replicas < 1 || c.workers < 1) throw ValidationError("replicas and workers must be at least 1");
  diffusivity_from_string(c.convention);
  return c;
}

Sampler sampler_from(const std::string& s) {
  if (s == "direct") return Sampler::Direct;
  if (s == "graphical") return Sampler::Graphical;
  throw ValidationError("unknown sampler '" + s + "'");
}

int finish(const SuiteOutput& out, const RunConfig& cfg, const std::string& command,
           std::chrono::steady_clock::time_point start) {
  write_outputs(cfg.output_dir, out, cfg, command, seconds_since(start));
  for (const auto& c : out.checks)
    std::printf("%s %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
  return out.pass() ? 0 : 2;
}

int cmd_simulate(const RunConfig& cfg, bool events, std::chrono::steady_clock::time_point start) {
  auto p = validate_params(cfg.raw_params());
  for (const auto& w : p.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  auto k = derive_constants(p, diffusivity_from_string(cfg.convention));
  auto kind = init_kind_from_string(cfg.init_kind);
  if (kind == InitKind::Explicit) throw ValidationError("explicit initial data is not available from the CLI");
  RunOptions opt;
  opt.t_final = cfg.t_final;
  opt.snapshot_dt = cfg.snapshot_dt;
  opt.record_log = true;
  opt.sampler = sampler_from(cfg.sampler);
  Ring ring(p.window);
  struct Rep {
    RunResult run;
    CHField ch;
  };
  auto reps = orchestrate_ensemble(cfg.replicas, cfg.seed, cfg.workers, [&](long, Rng& rng) {
    auto init = init_config(kind, ring, rng, {});
    Rep r{run(init, k, opt, rng), {}};
    r.ch = build_ch_field(r.run.traj, k);
    return r;
  });
  SuiteOutput out;
  out.suite = "simulate";
  Csv snaps({"replica", "time", "site", "spin"});
  Csv fields({"replica", "time", "site", "h", "Z"});
  Csv ev({"replica", "time", "bond", "direction"});
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const auto& tr = reps[r].run.traj;
    for (std::size_t t = 0; t < tr.times.size(); ++t)
      for (int i = 0; i < p.window; ++i) {
        snaps.row(static_cast<long>(r), tr.times[t], ring.site(i), static_cast<int>(tr.spins[t].spins[i]));
        fields.row(static_cast<long>(r), tr.times[t], ring.site(i), reps[r].ch.h(t, i), reps[r].ch.Z(t, i));
      }
    if (events)
      for (const auto& e : reps[r].run.log.events)
        ev.row(static_cast<long>(r), e.time, ring.site(e.bond), std::string(e.dir == Dir::Left ? "left" : "right"));
    out.rows.push_back(make_row("event_count", p.N, p.beta_star, static_cast<double>(reps[r].run.n_events), INFINITY));
    auto audit = jump_size_audit(reps[r].run.log, p.N, p.window);
    out.rows.push_back(make_row("max_jumps_per_block", p.N, p.beta_star, static_cast<double>(audit.max_block_count),
                                audit.cap));
    if (reps[r].run.log.truncated) out.checks.push_back({"run_truncated", false, "replica " + std::to_string(r)});
  }
  out.files.emplace("snapshots.csv", snaps);
  out.files.emplace("fields.csv", fields);
  if (events) out.files.emplace("events.csv", ev);
  for (long i = 0; i < cfg.replicas; ++i) out.seeds.push_back(split_seed(cfg.seed, static_cast<std::uint64_t>(i)));
  return finish(out, cfg, "simulate", start);
}

int cmd_heatkernel(const RunConfig& cfg, std::chrono::steady_clock::time_point start) {
  RawParams raw = cfg.raw_params();
  raw.window = cfg.kernel_window;
  auto p = validate_params(raw);
  auto k = derive_constants(p, diffusivity_from_string(cfg.convention));
  auto P = solve_kernel(k, 0.0, cfg.t_final, kernel_method_from_string(cfg.kernel_method));
  for (const auto& w : P.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  auto B = homogeneous_kernel(k, 0.0, cfg.t_final);
  Ring ring(p.window);
  SuiteOutput out;
  out.suite = "heatkernel";
  Csv csv({"S", "T", "x", "y", "P", "Pbar"});
  for (int x = 0; x < p.window; ++x)
    for (int y = 0; y < p.window; ++y) csv.row(P.S, P.T, ring.site(x), ring.site(y), P.P(x, y), B.P(x, y));
  out.files.emplace("kernel.csv", csv);
  double row = max_row_sum_deviation(P.P);
  out.rows.push_back(make_row("kernel_row_sum_dev", p.N, p.beta_star, row, cfg.kernel_tol));
  out.rows.push_back(make_row("kernel_neg_min_entry", p.N, p.beta_star, -P.P.minCoeff(), cfg.kernel_tol));
  out.checks.push_back({"kernel_row_sums", row <= cfg.kernel_tol, "deviation " + std::to_string(row)});
  return finish(out, cfg, "heatkernel", start);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slowbond: ASEP with mesoscopic slow bonds, simulation and verification"};
  app.require_subcommand(1);
  Overrides o;
  std::string suite;
  std::vector<std::string> dirs;
  std::string report_out = "stats.csv";

  auto* sim = app.add_subcommand("simulate", "run the particle system and write snapshots and fields");
  add_common(sim, o);
  sim->add_flag("--events", o.events, "also write the event log");
  auto* hk = app.add_subcommand("heatkernel", "compute the kernel over [0, t-final]");
  add_common(hk, o);
  auto* ver = app.add_subcommand("verify", "run one verification suite");
  add_common(ver, o);
  ver->add_option("suite", suite, "suite name")->required()->check(CLI::IsMember(known_suites()));
  auto* cmp = app.add_subcommand("compare", "distributional comparison against the SHE reference");
  add_common(cmp, o);
  auto* rep = app.add_subcommand("report", "merge estimates.csv from run directories into stats.csv");
  rep->add_option("dirs", dirs, "run directories")->required();
  rep->add_option("--out", report_out, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  auto start = std::chrono::steady_clock::now();
  try {
    if (rep->parsed()) {
      report(dirs).write(report_out);
      return 0;
    }
    RunConfig cfg = build_config(o);
    if (sim->parsed()) return cmd_simulate(cfg, o.events, start);
    if (hk->parsed()) return cmd_heatkernel(cfg, start);
    if (ver->parsed()) return finish(run_suite(suite, settings_from(cfg)), cfg, "verify " + suite, start);
    if (cmp->parsed()) return finish(run_suite("kpz", settings_from(cfg)), cfg, "compare", start);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const EnsembleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
