// Acceptance run: every verification suite through the command-line tool at its default
// sizes, one PASS/FAIL line per criterion, then a determinism pass that reruns suites from
// their own manifests and compares the output bytes.

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "slowbond/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Criterion {
  std::string label;
  std::string suite;
  double limit_seconds;
  // overrides for the reduced determinism runs of suites too slow to repeat in full
  std::string reduced;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> c{
      {"residual_structure", "residual", 1.0, ""},
      {"kernel_conservation", "kernel", 60.0, ""},
      {"oracle_equivalence", "oracle", 120.0, ""},
      {"duhamel_identity", "duhamel", 120.0, ""},
      {"nash_on_diagonal", "nash", 300.0, ""},
      {"perturbative_gap", "gap", 300.0, ""},
      {"nash_sobolev", "sobolev", 60.0, ""},
      {"canonical_azuma", "azuma", 120.0, ""},
      {"martingale_coupling", "martingale", 600.0, "--replicas 200"},
      {"pathwise_gap_trend", "pathwise", 1800.0, "--replicas 20"},
      {"kpz_proxy", "kpz", 3600.0, "--replicas 40"},
  };
  return c;
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

int run(const std::string& cmd) {
  int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

nlohmann::json manifest(const fs::path& dir) {
  return nlohmann::json::parse(slowbond::read_file((dir / "manifest.json").string()));
}

// Every file but the manifest (which holds wall-clock time and the output path) must match.
bool same_outputs(const fs::path& a, const fs::path& b, std::string& why) {
  std::map<std::string, std::string> fa, fb;
  for (const auto& e : fs::directory_iterator(a))
    if (e.path().filename() != "manifest.json") fa[e.path().filename().string()] = slowbond::read_file(e.path().string());
  for (const auto& e : fs::directory_iterator(b))
    if (e.path().filename() != "manifest.json") fb[e.path().filename().string()] = slowbond::read_file(e.path().string());
  if (fa.size() != fb.size()) {
    why = "different file sets";
    return false;
  }
  for (const auto& [name, bytes] : fa) {
    auto it = fb.find(name);
    if (it == fb.end() || it->second != bytes) {
      why = name + " differs";
      return false;
    }
  }
  if (manifest(a)["checksums_fnv1a64"] != manifest(b)["checksums_fnv1a64"]) {
    why = "manifest checksums differ";
    return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance run over all verification suites"};
  std::string workdir = "acceptance_runs", cli;
  std::vector<std::string> only;
  app.add_option("--workdir", workdir, "scratch directory for run outputs");
  app.add_option("--cli", cli, "path to the slowbond executable")->required();
  app.add_option("--only", only, "restrict to these suites");
  CLI11_PARSE(app, argc, argv);

  fs::remove_all(workdir);
  fs::create_directories(workdir);
  const std::string seed = "--seed 20240601";
  bool all = true;
  std::vector<std::string> determinism_notes;
  bool deterministic = true;

  for (const auto& c : criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.suite) == only.end()) continue;
    fs::path dir = fs::path(workdir) / c.suite;
    std::string log = (fs::path(workdir) / (c.suite + ".log")).string();
    int rc = run(quote(cli) + " verify " + c.suite + " " + seed + " --workers 1 --out " + quote(dir.string()) +
                 " > " + quote(log) + " 2>&1");
    std::string detail;
    bool pass = rc == 0;
    double wall = 0.0;
    if (fs::exists(dir / "manifest.json")) {
      auto m = manifest(dir);
      wall = m["wall_clock_seconds"].get<double>();
      for (const auto& ch : m["checks"]) {
        detail += std::string(ch["pass"].get<bool>() ? "" : "!") + ch["name"].get<std::string>() + " [" +
                  ch["detail"].get<std::string>() + "]; ";
      }
    } else {
      pass = false;
      detail = "no manifest (exit " + std::to_string(rc) + "); ";
    }
    bool in_time = wall < c.limit_seconds;
    pass = pass && in_time;
    char t[96];
    std::snprintf(t, sizeof t, "runtime %.1fs (limit %.0fs)", wall, c.limit_seconds);
    std::printf("%s %s: %s%s\n", pass ? "PASS" : "FAIL", c.label.c_str(), detail.c_str(), t);
    std::fflush(stdout);
    all = all && pass;

    // determinism: rerun from the manifest just written, or from a reduced manifest
    fs::path base = dir;
    if (!c.reduced.empty()) {
      base = fs::path(workdir) / (c.suite + "_reduced");
      run(quote(cli) + " verify " + c.suite + " " + seed + " --workers 1 " + c.reduced + " --out " +
          quote(base.string()) + " > /dev/null 2>&1");
    }
    if (!fs::exists(base / "manifest.json")) {
      deterministic = false;
      determinism_notes.push_back(c.suite + ": no base run");
      continue;
    }
    std::string mf = (base / "manifest.json").string();
    fs::path again = fs::path(workdir) / (c.suite + "_rerun");
    fs::path threads = fs::path(workdir) / (c.suite + "_workers8");
    run(quote(cli) + " verify " + c.suite + " --config " + quote(mf) + " --out " + quote(again.string()) +
        " > /dev/null 2>&1");
    std::string why;
    if (!same_outputs(base, again, why)) {
      deterministic = false;
      determinism_notes.push_back(c.suite + " rerun: " + why);
    }
    if (!c.reduced.empty()) {
      run(quote(cli) + " verify " + c.suite + " --config " + quote(mf) + " --workers 8 --out " +
          quote(threads.string()) + " > /dev/null 2>&1");
      if (!same_outputs(base, threads, why)) {
        deterministic = false;
        determinism_notes.push_back(c.suite + " 8 workers: " + why);
      }
    }
  }

  std::string notes;
  for (const auto& n : determinism_notes) notes += n + "; ";
  std::printf("%s determinism: reruns from manifest byte-identical for every suite "
              "(full size where cheap, reduced replicas otherwise; 1 vs 8 workers on the reduced runs)%s%s\n",
              deterministic ? "PASS" : "FAIL", notes.empty() ? "" : ": ", notes.c_str());
  all = all && deterministic;
  return all ? 0 : 1;
}
