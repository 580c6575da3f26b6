#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "support.hpp"

namespace fs = std::filesystem;

using namespace rctsyn;
using testsupport::read_file;
using testsupport::run_cli;
using testsupport::TempDir;
using testsupport::write_file;

namespace {

const char *kSchemaJson = R"({
  "columns": [
    {"name": "y",  "role": "response", "kind": "continuous", "bounds": ["-inf", "inf"]},
    {"name": "t1", "role": "treatment"},
    {"name": "b",  "role": "block", "kind": "discrete", "levels": ["u", "v"]},
    {"name": "x1", "role": "covariate", "kind": "continuous", "bounds": [-5, 5]}
  ]
})";

Schema cli_schema() { return Schema::parse(kSchemaJson); }

Dataset cli_trial(std::size_t n, std::uint64_t seed) {
  const Schema s = cli_schema();
  Dataset d = Dataset::empty_like(s, n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    d.levels(2)[i] = static_cast<std::int32_t>(i % 2);
    d.levels(1)[i] = rng.bernoulli(0.5) ? 1 : 0;
    d.real(3)[i] = rng.uniform(-5.0, 5.0);
    d.real(0)[i] = 0.5 + 1.2 * d.levels(1)[i] + 0.2 * d.real(3)[i] + rng.normal();
  }
  return d;
}

struct CliFixture {
  TempDir dir{"cli_fixture"};
  std::string schema_path;
  std::string data_path;

  CliFixture() {
    schema_path = (dir.path() / "schema.json").string();
    data_path = (dir.path() / "data.csv").string();
    write_file(schema_path, kSchemaJson);
    write_csv_file(cli_trial(120, 880011), data_path);
  }

  std::string base_args() const {
    return "--data '" + data_path + "' --schema '" + schema_path + "'";
  }
};

}  // namespace

TEST_CASE("synthesize writes a reproducible release bundle") {
  const CliFixture fx;
  const std::string out1 = (fx.dir.path() / "rel1").string();
  const std::string out2 = (fx.dir.path() / "rel2").string();

  const auto r1 = run_cli("synthesize " + fx.base_args() +
                          " --epsilon 1 --seed 99 --out '" + out1 + "'");
  INFO(r1.err);
  REQUIRE(r1.exit_code == 0);
  CHECK(r1.err.find("rctsyn synthesize:") != std::string::npos);
  CHECK(r1.err.find("seed=99") != std::string::npos);
  CHECK(r1.err.find("design=stratified") != std::string::npos);

  const json release = json::parse(read_file(fs::path(out1) / "release.json"));
  CHECK(release["privacy"]["epsilon"] == json(1.0));
  CHECK(release["n"] == 120);
  CHECK(release["config"]["seed"] == 99);

  // Same inputs, same seed: byte-identical outputs.
  const auto r2 = run_cli("synthesize " + fx.base_args() +
                          " --epsilon 1 --seed 99 --out '" + out2 + "'");
  REQUIRE(r2.exit_code == 0);
  CHECK(read_file(fs::path(out1) / "synthetic.csv") ==
        read_file(fs::path(out2) / "synthetic.csv"));
  CHECK(read_file(fs::path(out1) / "release.json") ==
        read_file(fs::path(out2) / "release.json"));

  // The synthetic frame loads back under the same schema.
  const Dataset synth =
      load_dataset_file((fs::path(out1) / "synthetic.csv").string(), cli_schema(),
                        /*dp_mode=*/false);
  CHECK(synth.n_rows() == 120);
}

TEST_CASE("synthesize without a seed generates and reports one") {
  const CliFixture fx;
  const std::string out = (fx.dir.path() / "rel").string();
  const auto r = run_cli("synthesize " + fx.base_args() + " --epsilon inf --out '" +
                         out + "'");
  REQUIRE(r.exit_code == 0);
  CHECK(r.err.find("note: no seed given; using generated seed") != std::string::npos);
}

TEST_CASE("synthesize rejects bad configuration with exit code 2") {
  const CliFixture fx;
  const std::string out = (fx.dir.path() / "rel").string();

  SECTION("bad epsilon") {
    const auto r = run_cli("synthesize " + fx.base_args() +
                           " --epsilon -1 --seed 1 --out '" + out + "'");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("epsilon") != std::string::npos);
  }
  SECTION("bad zeta") {
    const auto r = run_cli("synthesize " + fx.base_args() +
                           " --epsilon 1 --zeta 7/3 --seed 1 --out '" + out + "'");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("zeta") != std::string::npos);
  }
  SECTION("stratified designs pin the output size") {
    const auto r = run_cli("synthesize " + fx.base_args() +
                           " --epsilon 1 --seed 1 --n-out 80 --out '" + out + "'");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("120") != std::string::npos);
  }
  SECTION("missing required flags") {
    const auto r = run_cli("synthesize --data nope.csv");
    CHECK(r.exit_code == 2);
  }
  SECTION("no subcommand") {
    const auto r = run_cli("");
    CHECK(r.exit_code == 2);
  }
  SECTION("help exits zero") {
    const auto r = run_cli("--help");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("synthesize") != std::string::npos);
  }
}

TEST_CASE("private runs enforce the declared support at load time") {
  const CliFixture fx;
  Dataset bad = cli_trial(50, 880022);
  bad.real(3)[10] = 7.25;  // outside [-5, 5]
  const std::string bad_path = (fx.dir.path() / "bad.csv").string();
  write_csv_file(bad, bad_path);
  const std::string out = (fx.dir.path() / "rel").string();

  const auto priv = run_cli("synthesize --data '" + bad_path + "' --schema '" +
                            fx.schema_path + "' --epsilon 1 --seed 1 --out '" + out +
                            "'");
  CHECK(priv.exit_code == 2);
  CHECK(priv.err.find("outside declared bounds") != std::string::npos);

  // Without a budget the same frame is accepted (values clamp with a warning).
  const auto open = run_cli("synthesize --data '" + bad_path + "' --schema '" +
                            fx.schema_path + "' --epsilon inf --seed 1 --out '" + out +
                            "'");
  INFO(open.err);
  CHECK(open.exit_code == 0);
  CHECK(open.err.find("clamped") != std::string::npos);
}

TEST_CASE("evaluate scores synthetic frames against the original") {
  const CliFixture fx;
  const std::string rel1 = (fx.dir.path() / "r1").string();
  const std::string rel2 = (fx.dir.path() / "r2").string();
  REQUIRE(run_cli("synthesize " + fx.base_args() + " --epsilon 2 --seed 5 --out '" +
                  rel1 + "'")
              .exit_code == 0);
  REQUIRE(run_cli("synthesize " + fx.base_args() + " --epsilon 2 --seed 6 --out '" +
                  rel2 + "'")
              .exit_code == 0);

  // Collect the two frames under one directory for pattern matching.
  const fs::path pool = fx.dir.path() / "pool";
  fs::create_directories(pool);
  fs::copy_file(fs::path(rel1) / "synthetic.csv", pool / "syn_a.csv");
  fs::copy_file(fs::path(rel2) / "synthetic.csv", pool / "syn_b.csv");

  const std::string out = (fx.dir.path() / "eval").string();
  const auto r = run_cli("evaluate " + fx.base_args() + " --synthetic '" +
                         (pool / "syn_*.csv").string() +
                         "' --sensitive-stat variance:x1 --out '" + out + "'");
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK(r.err.find("synthetic_frames=2") != std::string::npos);

  const std::string csv = read_file(fs::path(out) / "metrics.csv");
  CHECK(csv.find("variable,metric1_ci_overlap,") == 0);
  CHECK(csv.find("privacy_budget") == std::string::npos);
  CHECK(csv.find("\nt1,") != std::string::npos);

  const json metrics = json::parse(read_file(fs::path(out) / "metrics.json"));
  CHECK(metrics["pairs"] == 2);
  CHECK(metrics.contains("metric5_variance:x1"));

  SECTION("a pattern with no matches fails cleanly") {
    const auto miss = run_cli("evaluate " + fx.base_args() + " --synthetic '" +
                              (pool / "zz_*.csv").string() + "' --out '" + out + "'");
    CHECK(miss.exit_code == 2);
    CHECK(miss.err.find("no files match") != std::string::npos);
  }
}

TEST_CASE("simulate produces thread-count-independent tables") {
  const TempDir dir("cli_sim");
  const json study = json{
      {"name", "cli-toy"},
      {"dgp",
       json{{"n", 40},
            {"intercept", 0.05},
            {"treatment_effect", 1.0},
            {"residual_variance", 0.5},
            {"covariates", json::array({json{{"name", "x1"},
                                             {"dist", "uniform"},
                                             {"a", -5.0},
                                             {"b", 5.0},
                                             {"coef", 0.2}}})}}},
      {"epsilons", json::array({0.5, "inf"})},
      {"n_private", 3},
      {"n_synthetic_per_private", 2},
      {"seed", 77}};
  const std::string cfg_path = (dir.path() / "study.json").string();
  write_file(cfg_path, study.dump(2));

  const std::string out1 = (dir.path() / "run1").string();
  const std::string out2 = (dir.path() / "run2").string();
  const auto r1 = run_cli("simulate --config '" + cfg_path + "' --threads 1 --out '" +
                          out1 + "'");
  INFO(r1.err);
  REQUIRE(r1.exit_code == 0);
  CHECK(r1.err.find("rctsyn simulate:") != std::string::npos);
  const auto r2 = run_cli("simulate --config '" + cfg_path + "' --threads 2 --out '" +
                          out2 + "'");
  REQUIRE(r2.exit_code == 0);

  for (const char *name : {"metrics.csv", "metric5.csv", "study.json"}) {
    CHECK(read_file(fs::path(out1) / name) == read_file(fs::path(out2) / name));
  }
  const std::string m5 = read_file(fs::path(out1) / "metric5.csv");
  CHECK(m5.find("privacy_budget,mse_variance:x1\n") == 0);

  SECTION("run and rep overrides take effect") {
    const std::string out3 = (dir.path() / "run3").string();
    const auto r3 = run_cli("simulate --config '" + cfg_path +
                            "' --runs 2 --reps 1 --out '" + out3 + "'");
    REQUIRE(r3.exit_code == 0);
    const json res = json::parse(read_file(fs::path(out3) / "study.json"));
    CHECK(res["results"][0]["metrics"]["pairs"] == 2);
  }
}
