#ifndef SLOWBOND_IO_HPP
#define SLOWBOND_IO_HPP

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "slowbond/model.hpp"

namespace slowbond {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}
inline std::string fmt(long v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(const std::string& s) { return s; }
inline std::string fmt(const char* s) { return s; }
inline std::string fmt(bool b) { return b ? "true" : "false"; }

/// CSV table held in memory and written in one go with LF line endings.
class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

  template <class... T>
  void row(const T&... cells) {
    std::vector<std::string> r{fmt(cells)...};
    if (r.size() != header_.size()) throw IoError("csv row width does not match header");
    rows_.push_back(std::move(r));
  }
  void add(std::vector<std::string> r) {
    if (r.size() != header_.size()) throw IoError("csv row width does not match header");
    rows_.push_back(std::move(r));
  }
  void append(const Csv& other) {
    if (other.header_ != header_) throw IoError("csv schema mismatch");
    rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
  }

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
      if (header_[i] == name) return i;
    throw IoError("csv has no column '" + name + "'");
  }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += ',';
        out += r[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << str();
  }

  static Csv read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(f, line)) throw IoError("empty csv " + path);
    Csv c(split(line));
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      auto r = split(line);
      if (r.size() != c.header_.size()) throw IoError("ragged row in " + path);
      c.rows_.push_back(std::move(r));
    }
    return c;
  }

 private:
  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur += ch;
      }
    }
    out.push_back(cur);
    return out;
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Config files: a small TOML subset. Sections in brackets, `key = value` lines,
// values are integers, reals, true/false, "strings" or flat [arrays] of those.
// '#' starts a comment outside strings.

using TomlTable = std::map<std::string, std::string>;  // "section.key" -> raw value text

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

}  // namespace detail

inline TomlTable parse_toml(const std::string& text) {
  TomlTable t;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(detail::strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw IoError("config line " + std::to_string(lineno) + ": bad section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty() || val.empty()) throw IoError("config line " + std::to_string(lineno) + ": empty key or value");
    std::string full = section.empty() ? key : section + "." + key;
    if (t.count(full)) throw IoError("config line " + std::to_string(lineno) + ": duplicate key " + full);
    t[full] = val;
  }
  return t;
}

inline std::string toml_string(const std::string& raw) {
  if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"') throw IoError("expected a quoted string: " + raw);
  return raw.substr(1, raw.size() - 2);
}

inline double toml_real(const std::string& raw) {
  char* end = nullptr;
  double v = std::strtod(raw.c_str(), &end);
  if (end == raw.c_str() || *end != '\0') throw IoError("expected a number: " + raw);
  return v;
}

inline long toml_int(const std::string& raw) {
  char* end = nullptr;
  long v = std::strtol(raw.c_str(), &end, 10);
  if (end == raw.c_str() || *end != '\0') throw IoError("expected an integer: " + raw);
  return v;
}

inline std::uint64_t toml_u64(const std::string& raw) {
  char* end = nullptr;
  unsigned long long v = std::strtoull(raw.c_str(), &end, 10);
  if (end == raw.c_str() || *end != '\0' || raw.front() == '-') throw IoError("expected an unsigned integer: " + raw);
  return v;
}

inline bool toml_bool(const std::string& raw) {
  if (raw == "true") return true;
  if (raw == "false") return false;
  throw IoError("expected true or false: " + raw);
}

inline std::vector<std::string> toml_array(const std::string& raw) {
  if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']') throw IoError("expected an array: " + raw);
  std::vector<std::string> out;
  std::string inner = raw.substr(1, raw.size() - 2), cur;
  bool in_str = false;
  for (char c : inner) {
    if (c == '"') in_str = !in_str;
    if (c == ',' && !in_str) {
      out.push_back(detail::trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!detail::trim(cur).empty()) out.push_back(detail::trim(cur));
  return out;
}

/// Everything needed to rerun a pipeline.
struct RunConfig {
  // model
  int N = 16;
  double beta_star = 0.0;
  double eps_star2 = 0.0;
  std::vector<int> slow_bonds{0};
  bool strict_mode = false;
  std::string convention = "matched";
  double eps = 0.01;
  double delta = 0.01;
  // sim
  int window = 33;
  double t_final = 1.0;
  double snapshot_dt = 0.1;
  int replicas = 1;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string sampler = "direct";
  // init
  std::string init_kind = "bernoulli_half";
  // kernel
  int kernel_window = 33;
  std::string kernel_method = "uniformization";
  double kernel_tol = 1e-12;
  // sweep overrides for the verification suites; empty or zero keeps the suite default
  std::vector<int> sweep_N;
  std::vector<double> sweep_beta;
  long sweep_replicas = 0;
  int sweep_window = 0;
  // suites and output
  std::vector<std::string> suites;
  std::string output_dir = "out";

  bool operator==(const RunConfig&) const = default;

  RawParams raw_params() const {
    RawParams r;
    r.N = N;
    r.beta_star = beta_star;
    r.eps_star2 = eps_star2;
    r.slow_bonds = slow_bonds;
    r.window = window;
    r.strict_mode = strict_mode;
    return r;
  }
};

inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream o;
  auto q = [](const std::string& s) { return "\"" + s + "\""; };
  o << "[model]\n";
  o << "N = " << c.N << "\n";
  o << "beta_star = " << fmt(c.beta_star) << "\n";
  o << "eps_star2 = " << fmt(c.eps_star2) << "\n";
  o << "slow_bonds = [";
  for (std::size_t i = 0; i < c.slow_bonds.size(); ++i) o << (i ? ", " : "") << c.slow_bonds[i];
  o << "]\n";
  o << "strict_mode = " << fmt(c.strict_mode) << "\n";
  o << "convention = " << q(c.convention) << "\n";
  o << "eps = " << fmt(c.eps) << "\n";
  o << "delta = " << fmt(c.delta) << "\n\n";
  o << "[sim]\n";
  o << "window = " << c.window << "\n";
  o << "t_final = " << fmt(c.t_final) << "\n";
  o << "snapshot_dt = " << fmt(c.snapshot_dt) << "\n";
  o << "replicas = " << c.replicas << "\n";
  o << "seed = " << c.seed << "\n";
  o << "workers = " << c.workers << "\n";
  o << "sampler = " << q(c.sampler) << "\n\n";
  o << "[init]\n";
  o << "kind = " << q(c.init_kind) << "\n\n";
  o << "[kernel]\n";
  o << "window = " << c.kernel_window << "\n";
  o << "method = " << q(c.kernel_method) << "\n";
  o << "tol = " << fmt(c.kernel_tol) << "\n\n";
  o << "[sweep]\n";
  o << "N = [";
  for (std::size_t i = 0; i < c.sweep_N.size(); ++i) o << (i ? ", " : "") << c.sweep_N[i];
  o << "]\n";
  o << "beta_star = [";
  for (std::size_t i = 0; i < c.sweep_beta.size(); ++i) o << (i ? ", " : "") << fmt(c.sweep_beta[i]);
  o << "]\n";
  o << "replicas = " << c.sweep_replicas << "\n";
  o << "window = " << c.sweep_window << "\n\n";
  o << "[suites]\n";
  o << "run = [";
  for (std::size_t i = 0; i < c.suites.size(); ++i) o << (i ? ", " : "") << q(c.suites[i]);
  o << "]\n\n";
  o << "[output]\n";
  o << "dir = " << q(c.output_dir) << "\n";
  return o.str();
}

inline const std::vector<std::string>& known_suites() {
  static const std::vector<std::string> s{"residual", "kernel",  "oracle",     "duhamel",  "nash",
                                          "gap",      "sobolev", "azuma",      "martingale", "pathwise",
                                          "kpz",      "blocks",  "regularity"};
  return s;
}

inline RunConfig parse_config(const std::string& text) {
  TomlTable t = parse_toml(text);
  RunConfig c;
  auto take = [&](const std::string& key) -> const std::string* {
    auto it = t.find(key);
    if (it == t.end()) return nullptr;
    return &it->second;
  };
  std::map<std::string, bool> used;
  auto get = [&](const std::string& key, auto&& assign) {
    if (auto* v = take(key)) {
      assign(*v);
      used[key] = true;
    }
  };
  get("model.N", [&](auto& v) { c.N = static_cast<int>(toml_int(v)); });
  get("model.beta_star", [&](auto& v) { c.beta_star = toml_real(v); });
  get("model.eps_star2", [&](auto& v) { c.eps_star2 = toml_real(v); });
  get("model.slow_bonds", [&](auto& v) {
    c.slow_bonds.clear();
    for (auto& e : toml_array(v)) c.slow_bonds.push_back(static_cast<int>(toml_int(e)));
  });
  get("model.strict_mode", [&](auto& v) { c.strict_mode = toml_bool(v); });
  get("model.convention", [&](auto& v) { c.convention = toml_string(v); });
  get("model.eps", [&](auto& v) { c.eps = toml_real(v); });
  get("model.delta", [&](auto& v) { c.delta = toml_real(v); });
  get("sim.window", [&](auto& v) { c.window = static_cast<int>(toml_int(v)); });
  get("sim.t_final", [&](auto& v) { c.t_final = toml_real(v); });
  get("sim.snapshot_dt", [&](auto& v) { c.snapshot_dt = toml_real(v); });
  get("sim.replicas", [&](auto& v) { c.replicas = static_cast<int>(toml_int(v)); });
  get("sim.seed", [&](auto& v) { c.seed = toml_u64(v); });
  get("sim.workers", [&](auto& v) { c.workers = static_cast<int>(toml_int(v)); });
  get("sim.sampler", [&](auto& v) { c.sampler = toml_string(v); });
  get("init.kind", [&](auto& v) { c.init_kind = toml_string(v); });
  get("kernel.window", [&](auto& v) { c.kernel_window = static_cast<int>(toml_int(v)); });
  get("kernel.method", [&](auto& v) { c.kernel_method = toml_string(v); });
  get("kernel.tol", [&](auto& v) { c.kernel_tol = toml_real(v); });
  get("sweep.N", [&](auto& v) {
    c.sweep_N.clear();
    for (auto& e : toml_array(v)) c.sweep_N.push_back(static_cast<int>(toml_int(e)));
  });
  get("sweep.beta_star", [&](auto& v) {
    c.sweep_beta.clear();
    for (auto& e : toml_array(v)) c.sweep_beta.push_back(toml_real(e));
  });
  get("sweep.replicas", [&](auto& v) { c.sweep_replicas = toml_int(v); });
  get("sweep.window", [&](auto& v) { c.sweep_window = static_cast<int>(toml_int(v)); });
  get("suites.run", [&](auto& v) {
    c.suites.clear();
    for (auto& e : toml_array(v)) c.suites.push_back(toml_string(e));
  });
  get("output.dir", [&](auto& v) { c.output_dir = toml_string(v); });
  for (const auto& [key, _] : t)
    if (!used.count(key)) throw IoError("unknown config key " + key);
  if (!t.count("sim.seed")) throw IoError("config must set sim.seed");
  for (const auto& s : c.suites)
    if (std::find(known_suites().begin(), known_suites().end(), s) == known_suites().end())
      throw IoError("unknown suite " + s);
  if (c.replicas < 1) throw IoError("sim.replicas must be at least 1");
  if (c.workers < 1) throw IoError("sim.workers must be at least 1");
  return c;
}

inline RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

}  // namespace slowbond

#endif
