#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "tmvr/cli.hpp"

using namespace tmvr;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "tmvr");
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tmvr_cli_" + name);
  fs::remove_all(p);
  return p;
}

Json parse_json(const std::string& s) { return Json::parse(s); }

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const RunConfig c = parse_config_text("");
  const RunConfig d;
  EXPECT_EQ(render_config(c), render_config(d));
  EXPECT_EQ(c.map1d.densities, 5u);
  EXPECT_EQ(c.map1d.batch, 100u);
  EXPECT_EQ(c.lorenz.snapshots, 7u);
  EXPECT_EQ(c.lorenz.params.sigma, 10.0);
  EXPECT_EQ(c.divfield.batch, 200u);
  EXPECT_EQ(c.divfield.hidden, (std::vector<std::size_t>{50, 50}));
}

TEST(Config, EveryKeyHasADefaultThatRoundTrips) {
  const RunConfig d;
  const std::string text = render_config(d);
  for (const auto& k : config_key_names()) {
    const auto dot = k.find('.');
    EXPECT_NE(text.find(k.substr(dot + 1) + " = "), std::string::npos) << k;
  }
  EXPECT_EQ(render_config(parse_config_text(text)), text);
}

TEST(Config, SectionsAndDottedKeysAreEquivalent) {
  const RunConfig a = parse_config_text("[lorenz]\nbatch = 64\nhidden = [8, 8]\n");
  const RunConfig b = parse_config_text("lorenz.batch = 64\nlorenz.hidden = [8,8]  # comment\n");
  EXPECT_EQ(a.lorenz.batch, 64u);
  EXPECT_EQ(render_config(a), render_config(b));
}

TEST(Config, NegativeSigmaErrorNamesTheKey) {
  try {
    parse_config_text("lorenz.sigma = -1\n").validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lorenz.sigma"), std::string::npos) << e.what();
  }
}

TEST(Config, UnknownKeyRejectedWithLine) {
  try {
    parse_config_text("seed = 1\nmap1d.batchsize = 3\n", {}, "x.toml");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("x.toml:2"), std::string::npos) << what;
    EXPECT_NE(what.find("map1d.batchsize"), std::string::npos) << what;
  }
}

TEST(Config, TypeMismatchAndDuplicatesRejected) {
  EXPECT_THROW(parse_config_text("map1d.batch = many\n"), ConfigError);
  EXPECT_THROW(parse_config_text("map1d.batch = -3\n"), ConfigError);
  EXPECT_THROW(parse_config_text("map1d.learning_rate = fast\n"), ConfigError);
  EXPECT_THROW(parse_config_text("map1d.batch = 3\n[map1d]\nbatch = 4\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[nosuch]\nbatch = 4\n"), ConfigError);
  EXPECT_THROW(parse_config_text("just words\n"), ConfigError);
}

TEST(Config, DigestStableUnderReordering) {
  const RunConfig a = parse_config_text("seed = 3\nmap1d.batch = 7\nlorenz.dt = 0.2\n");
  const RunConfig b = parse_config_text("lorenz.dt = 0.2\nmap1d.batch = 7\nseed = 3\n");
  EXPECT_EQ(config_digest(a), config_digest(b));
  EXPECT_EQ(config_digest(a).size(), 16u);
  const RunConfig c = parse_config_text("seed = 4\nmap1d.batch = 7\nlorenz.dt = 0.2\n");
  EXPECT_NE(config_digest(a), config_digest(c));
}

TEST(Config, DigestIgnoresOutputLocationAndWorkers) {
  RunConfig a, b;
  b.out = "elsewhere";
  b.workers = 4;
  EXPECT_EQ(config_digest(a), config_digest(b));
}

TEST(Config, OverridesApplyInOrder) {
  RunConfig c;
  apply_override(c, "divfield.iterations=12");
  apply_override(c, "divfield.iterations = 13");
  EXPECT_EQ(c.divfield.iterations, 13u);
  EXPECT_THROW(apply_override(c, "divfield.iterations"), ConfigError);
  EXPECT_THROW(apply_override(c, "nope=1"), ConfigError);
}

TEST(Cli, UnknownSubcommandExitsOneWithUsage) {
  const auto r = run_cli({"frobnicate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("recover-map"), std::string::npos);
}

TEST(Cli, BinaryReportsUsageErrors) {
  const std::string cmd = std::string(TMVR_CLI_PATH) + " frobnicate > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 1);
  const std::string help = std::string(TMVR_CLI_PATH) + " --help > /dev/null 2>&1";
  EXPECT_EQ(std::system(help.c_str()), 0);
}

TEST(Cli, ValidationErrorExitsOne) {
  const fs::path dir = scratch("invalid");
  const auto r = run_cli({"recover-lorenz", "--set", "lorenz.sigma=-1", "--out", dir.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("lorenz.sigma"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "summary.json"));
}

TEST(Cli, RecoverMapIsReproducible) {
  const fs::path a = scratch("map_a"), b = scratch("map_b");
  const std::vector<std::string> common = {"recover-map", "--seed", "7", "--iterations", "60", "--set",
                                           "map1d.hidden=[8,8]", "--set", "map1d.eval_points=64", "--trials", "2"};
  auto args_a = common, args_b = common;
  args_a.insert(args_a.end(), {"--out", a.string()});
  args_b.insert(args_b.end(), {"--out", b.string()});
  const auto ra = run_cli(args_a);
  const auto rb = run_cli(args_b);
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  EXPECT_EQ(read_text_file(a / "summary.json"), read_text_file(b / "summary.json"));
  EXPECT_EQ(read_text_file(a / "summary.csv"), read_text_file(b / "summary.csv"));
  EXPECT_EQ(read_text_file(a / "trial_001" / "eval_grid.csv"), read_text_file(b / "trial_001" / "eval_grid.csv"));
  const Json j = parse_json(read_text_file(a / "summary.json"));
  EXPECT_EQ(j["experiment"], "map1d");
  EXPECT_EQ(j["trials"].size(), 2u);
  EXPECT_EQ(j["trials"][1]["seed"], 8);
  EXPECT_EQ(j["trials"][0]["iterations"], 60);
  EXPECT_TRUE(fs::exists(a / "timing.csv"));
  EXPECT_TRUE(fs::exists(a / "trial_000" / "model.timlp"));
  EXPECT_TRUE(fs::exists(a / "trial_000" / "loss_curve.csv"));
  EXPECT_TRUE(fs::exists(a / "trial_000" / "densities.csv"));
}

TEST(Cli, ResolvedConfigReproducesTheRun) {
  const fs::path a = scratch("resolved_a"), b = scratch("resolved_b");
  const auto ra = run_cli({"recover-divfield", "--seed", "3", "--iterations", "40", "--densities", "2", "--set",
                           "divfield.hidden=[6,6]", "--set", "divfield.eval_grid=20", "--out", a.string()});
  ASSERT_EQ(ra.code, 0) << ra.err;
  const auto rb = run_cli({"recover-divfield", "--config", (a / "config.resolved").string(), "--out", b.string()});
  ASSERT_EQ(rb.code, 0) << rb.err;
  EXPECT_EQ(read_text_file(a / "summary.json"), read_text_file(b / "summary.json"));
  EXPECT_EQ(read_text_file(a / "trial_000" / "eval_grid.csv"), read_text_file(b / "trial_000" / "eval_grid.csv"));
  const RunConfig resolved = parse_config_file((a / "config.resolved").string());
  EXPECT_EQ(resolved.divfield.densities, 2u);
  EXPECT_EQ(resolved.seed, 3u);
}

TEST(Cli, FlagsOverrideSetWhichOverridesConfigFile) {
  const fs::path dir = scratch("precedence");
  fs::create_directories(dir);
  write_text_file(dir / "in.toml", "[divfield]\niterations = 5\nbatch = 9\neval_grid = 10\nhidden = [4, 4]\n");
  const auto r = run_cli({"recover-divfield", "--config", (dir / "in.toml").string(), "--set", "divfield.batch=11",
                          "--set", "divfield.iterations=6", "--iterations", "7", "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const RunConfig c = parse_config_file((dir / "out" / "config.resolved").string());
  EXPECT_EQ(c.divfield.iterations, 7u);
  EXPECT_EQ(c.divfield.batch, 11u);
  EXPECT_EQ(c.divfield.eval_grid, 10u);
}

TEST(Cli, GroundTruthRecoverLorenz) {
  const fs::path dir = scratch("lorenz_gt");
  const auto r = run_cli({"recover-lorenz", "--ground-truth", "--particles", "500", "--snapshots", "2", "--out",
                          dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = parse_json(read_text_file(dir / "summary.json"));
  EXPECT_LT(j["trials"][0]["mse_map"].get<double>(), 1e-8);
  EXPECT_LT(j["trials"][0]["mse_field"].get<double>(), 1e-8);
  const std::string marg = read_text_file(dir / "trial_000" / "marginals.csv");
  EXPECT_EQ(marg.substr(0, marg.find('\n')), "snapshot,x,y,z");
}

TEST(Cli, SweepWritesPerMTables) {
  const fs::path dir = scratch("sweep");
  const auto r = run_cli({"sweep-divfield", "--iterations", "20", "--repeats", "2", "--m-max", "2", "--set",
                          "divfield.hidden=[4,4]", "--set", "divfield.eval_grid=10", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Mat table = read_csv_matrix((dir / "sweep.csv").string(), true);
  ASSERT_EQ(table.rows(), 2);
  EXPECT_EQ(table(0, 0), 1.0);
  EXPECT_EQ(table(1, 0), 2.0);
  EXPECT_EQ(table(0, 1), 2.0);
  EXPECT_TRUE(fs::exists(dir / "m_1" / "summary.json"));
  EXPECT_TRUE(fs::exists(dir / "m_2" / "trial_001" / "eval_grid.csv"));
  const Json j = parse_json(read_text_file(dir / "summary.json"));
  EXPECT_EQ(j["sweep"].size(), 2u);
  EXPECT_EQ(j["sweep"][1]["relative_error"]["count"], 2);
}

TEST(Cli, CheckEmbeddingCircleAcceptsBothProperties) {
  const auto r = run_cli({"check-embedding", "--fixture", "circle"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = parse_json(r.out);
  EXPECT_TRUE(j["injective_verdict"].get<bool>());
  EXPECT_TRUE(j["immersion_verdict"].get<bool>());
  EXPECT_EQ(j["n_test_points"], 256);
  EXPECT_FALSE(j.contains("note"));
}

TEST(Cli, CheckEmbeddingSineFailsInjectivity) {
  const auto r = run_cli({"check-embedding", "--fixture", "sine"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = parse_json(r.out);
  EXPECT_FALSE(j["injective_verdict"].get<bool>());
}

TEST(Cli, CheckEmbeddingQuotientCarriesNote) {
  const fs::path dir = scratch("embedding");
  const auto r = run_cli({"check-embedding", "--fixture", "quotient", "--points", "64", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = parse_json(r.out);
  EXPECT_EQ(j["note"], "evidence, not certificate");
  EXPECT_EQ(parse_json(read_text_file(dir / "embedding.json")), j);
  EXPECT_EQ(run_cli({"check-embedding", "--fixture", "torus"}).code, 1);
}

TEST(Cli, MetricOnCsvFiles) {
  const fs::path dir = scratch("metric");
  fs::create_directories(dir);
  write_text_file(dir / "a.csv", "x0\n0\n2\n");
  write_text_file(dir / "b.csv", "x0\n1\n1\n");
  const auto r = run_cli({"metric", (dir / "a.csv").string(), (dir / "b.csv").string(), "--header"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = parse_json(r.out);
  EXPECT_NEAR(j["value"].get<double>(), 1.0, 1e-12);
  EXPECT_EQ(j["estimator"], "exact-empirical");
  EXPECT_EQ(j["n_x"], 2);
  EXPECT_EQ(j["n_y"], 2);
}

TEST(Cli, MetricHeaderHandling) {
  const fs::path dir = scratch("metric_header");
  fs::create_directories(dir);
  write_text_file(dir / "a.csv", "x0,x1\n0,0\n");
  write_text_file(dir / "b.csv", "0,1\n");
  // A header line read as data is a parse error with a line number.
  const auto bad = run_cli({"metric", (dir / "a.csv").string(), (dir / "b.csv").string()});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find(":1"), std::string::npos) << bad.err;
  write_text_file(dir / "c.csv", "x0\n0\n");
  const auto mismatch = run_cli({"metric", (dir / "c.csv").string(), (dir / "a.csv").string(), "--header"});
  EXPECT_EQ(mismatch.code, 1);
}

TEST(Cli, MetricMinibatchIsSeeded) {
  const fs::path dir = scratch("metric_mb");
  fs::create_directories(dir);
  std::string a, b;
  for (int i = 0; i < 50; ++i) {
    a += std::to_string(i) + "\n";
    b += std::to_string(i + 3) + "\n";
  }
  write_text_file(dir / "a.csv", a);
  write_text_file(dir / "b.csv", b);
  const std::vector<std::string> args = {"metric", (dir / "a.csv").string(), (dir / "b.csv").string(),
                                         "--minibatch", "10", "--seed", "4"};
  const auto r1 = run_cli(args), r2 = run_cli(args);
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_EQ(r1.out, r2.out);
  const Json j = parse_json(r1.out);
  EXPECT_EQ(j["estimator"], "minibatch");
  EXPECT_EQ(j["n_x"], 10);
}
