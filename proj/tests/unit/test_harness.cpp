#include <gtest/gtest.h>

#include <filesystem>

#include "slowbond/harness.hpp"
#include "slowbond/suites.hpp"

using namespace slowbond;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("slowbond_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Config, RoundTrip) {
  RunConfig c;
  c.N = 64;
  c.beta_star = 0.1;
  c.slow_bonds = {0, 3};
  c.eps_star2 = 0.5;
  c.seed = 0xFFFFFFFFFFFFFFFFULL;
  c.sweep_N = {16, 32};
  c.sweep_beta = {0.0, 0.3333333333333333};
  c.suites = {"kernel", "residual"};
  c.output_dir = "runs/a b";
  c.sampler = "graphical";
  EXPECT_EQ(parse_config(serialize_config(c)), c);
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_config("[model]\nN = 16\n"), IoError);  // no seed
  EXPECT_THROW(parse_config("[sim]\nseed = 1\nbogus = 2\n"), IoError);
  EXPECT_THROW(parse_config("[sim]\nseed = 1\n[suites]\nrun = [\"nope\"]\n"), IoError);
  EXPECT_THROW(parse_config("[sim]\nseed = 1\nreplicas = 0\n"), IoError);
  EXPECT_THROW(parse_config("[sim]\nseed = 1\nseed = 2\n"), IoError);
  auto c = parse_config("# comment\n[sim]\nseed = 7 # trailing\n");
  EXPECT_EQ(c.seed, 7u);
}

TEST(Csv, WriteReadAndSchema) {
  auto dir = scratch("csv");
  Csv c({"a", "b"});
  c.row(1, 0.1);
  c.row(std::string("x"), true);
  c.write((dir / "t.csv").string());
  auto r = Csv::read((dir / "t.csv").string());
  EXPECT_EQ(r.header(), c.header());
  EXPECT_EQ(r.rows(), c.rows());
  EXPECT_EQ(r.rows()[0][1], "0.1");
  Csv other({"a", "c"});
  EXPECT_THROW(c.append(other), IoError);
  EXPECT_EQ(c.str().find('\r'), std::string::npos);
}

TEST(Ensemble, IndependentOfWorkerCount) {
  auto f = [](long i, Rng& rng) { return static_cast<double>(i) + rng.uniform(); };
  auto one = orchestrate_ensemble(64, 99, 1, f);
  auto eight = orchestrate_ensemble(64, 99, 8, f);
  EXPECT_EQ(one, eight);
  auto longer = orchestrate_ensemble(80, 99, 3, f);
  for (int i = 0; i < 64; ++i) EXPECT_EQ(longer[i], one[i]);
}

TEST(Ensemble, FailureReportsPartialCount) {
  auto f = [](long i, Rng&) -> int {
    if (i == 5) throw std::runtime_error("boom");
    return 0;
  };
  try {
    orchestrate_ensemble(10, 1, 1, f);
    FAIL() << "expected EnsembleError";
  } catch (const EnsembleError& e) {
    EXPECT_EQ(e.completed, 5);
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
}

TEST(Outputs, ManifestAndChecksums) {
  auto dir = scratch("manifest");
  SuiteOutput out;
  out.suite = "demo";
  out.rows.push_back(make_row("x", 16, 0.1, 0.5, 1.0, 0.1));
  out.checks.push_back({"x_ok", true, ""});
  out.seeds = {split_seed(3, 0)};
  RunConfig cfg;
  cfg.seed = 3;
  write_outputs(dir.string(), out, cfg, "verify demo", 0.25);
  auto m = nlohmann::json::parse(read_file((dir / "manifest.json").string()));
  EXPECT_EQ(m["code_version"], kCodeVersion);
  EXPECT_EQ(m["master_seed"], 3u);
  EXPECT_TRUE(m["pass"].get<bool>());
  EXPECT_EQ(m["checksums_fnv1a64"]["estimates.csv"], hex64(fnv1a(read_file((dir / "estimates.csv").string()))));
  EXPECT_EQ(config_from_manifest((dir / "manifest.json").string()), cfg);
}

TEST(Report, PoolsByInverseVariance) {
  auto a = scratch("rep_a"), b = scratch("rep_b");
  Csv ca(estimates_header()), cb(estimates_header());
  ca.row(std::string("m"), 16, 0.1, 1.0, 1.0, 2.0, true);
  cb.row(std::string("m"), 16, 0.1, 3.0, 2.0, 2.0, false);
  ca.write((a / "estimates.csv").string());
  cb.write((b / "estimates.csv").string());
  auto r = report({a.string(), b.string()});
  ASSERT_EQ(r.rows().size(), 1u);
  // weights 1 and 1/4: (1 + 3/4) / (5/4) = 1.4
  EXPECT_NEAR(toml_real(r.rows()[0][3]), 1.4, 1e-12);
  EXPECT_NEAR(toml_real(r.rows()[0][4]), std::sqrt(0.8), 1e-12);
  EXPECT_EQ(r.rows()[0][6], "true");
}

TEST(Report, RejectsMismatchedBoundsAndSchema) {
  auto a = scratch("rep_c"), b = scratch("rep_d");
  Csv ca(estimates_header()), cb(estimates_header());
  ca.row(std::string("m"), 16, 0.1, 1.0, 0.0, 2.0, true);
  cb.row(std::string("m"), 16, 0.1, 1.0, 0.0, 3.0, true);
  ca.write((a / "estimates.csv").string());
  cb.write((b / "estimates.csv").string());
  EXPECT_THROW(report({a.string(), b.string()}), IoError);
  Csv bad({"name", "value"});
  bad.write((b / "estimates.csv").string());
  EXPECT_THROW(report({a.string(), b.string()}), IoError);
}

TEST(Suites, TableCoversKnownSuites) {
  for (const auto& name : known_suites()) EXPECT_NO_THROW(suite_table().at(name)) << name;
}

TEST(Suites, ResidualSuiteSmall) {
  RunConfig cfg;
  cfg.sweep_N = {16, 64};
  cfg.sweep_beta = {0.25};
  auto out = run_suite("residual", settings_from(cfg));
  EXPECT_TRUE(out.pass());
  EXPECT_FALSE(out.rows.empty());
}
