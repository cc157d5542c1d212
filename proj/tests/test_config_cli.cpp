#include <doctest.h>

#include <set>
#include <sstream>

#include "json.hpp"
#include "lsnm/cli.hpp"
#include "lsnm/config.hpp"
#include "support.hpp"

using namespace lsnm;
using namespace lsnm::test;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

nlohmann::json json_file(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

const char* small_config =
    "seed = 4\n"
    "sim.n_subjects = 16\n"
    "sim.n_regions = 6\n"
    "sampler.chains = 2\n"
    "sampler.warmup = 300\n"
    "sampler.samples = 300\n"
    "score.draws = 50\n";

}  // namespace

TEST_CASE("key = value parsing") {
  const KeyValueConfig c = KeyValueConfig::parse("# comment\n\n a = 1 \nb=x, y ,z\nflag = true\n");
  CHECK(c.get_int("a", 0) == 1);
  CHECK(c.get_list("b", {}) == std::vector<std::string>{"x", "y", "z"});
  CHECK(c.get_bool("flag", false));
  CHECK(c.get("missing", "dflt") == "dflt");
  CHECK(c.get_double("missing", 2.5) == 2.5);
  CHECK_THROWS_WITH_AS(KeyValueConfig::parse("a = 1\nnot a pair\n"), doctest::Contains(":2"), ConfigInvalid);
  CHECK_THROWS_WITH_AS(KeyValueConfig::parse("a = 1\na = 2\n"), doctest::Contains("duplicate key 'a'"),
                       ConfigInvalid);
  CHECK_THROWS_AS(KeyValueConfig::parse("= 3\n"), ConfigInvalid);
  CHECK_THROWS_AS(KeyValueConfig::parse("a = x\n").get_int("a", 0), ConfigInvalid);
  CHECK_THROWS_AS(KeyValueConfig::parse("a = maybe\n").get_bool("a", false), ConfigInvalid);
}

TEST_CASE("config digest follows the bytes") {
  const auto a = KeyValueConfig::parse("a = 1\n"), b = KeyValueConfig::parse("a = 1\n");
  const auto c = KeyValueConfig::parse("a =  1\n");
  CHECK(a.digest() == b.digest());
  CHECK(a.digest() != c.digest());
  CHECK(a.values() == c.values());
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("study plans") {
  const StudyPlan d = study_plan_from(KeyValueConfig{});
  CHECK(d.scenarios.size() == 6);
  CHECK(d.replicates == 50);
  CHECK(d.base.models.size() == 3);
  CHECK(d.base.scenario.n_subjects == 120);

  const StudyPlan p = study_plan_from(KeyValueConfig::parse(
      "seed = 9\nsim.n_regions = 8\nsampler.chains = 3\nprior.rho_a = 2\nstudy.scenarios = none, strong\n"
      "study.models = longitudinal\nstudy.replicates = 7\nscore.mode = marginal\nsim.abnormal_regions = 1, 3\n"));
  CHECK(p.seed == 9);
  CHECK(p.base.scenario.n_regions == 8);
  CHECK(p.base.sampler.n_chains == 3);
  CHECK(p.base.prior.rho_a == 2.0);
  CHECK(p.scenarios == std::vector<Scenario>{Scenario::none, Scenario::strong});
  CHECK(p.base.models == std::vector<ModelKind>{ModelKind::longitudinal});
  CHECK(p.replicates == 7);
  CHECK(p.base.score_mode == ScoreMode::marginal);
  CHECK(p.base.scenario.abnormal_regions == std::vector<int>{1, 3});

  CHECK_THROWS_WITH_AS(study_plan_from(KeyValueConfig::parse("sampler.chain = 2\n")),
                       doctest::Contains("sampler.chain"), ConfigInvalid);
  CHECK_THROWS_AS(study_plan_from(KeyValueConfig::parse("study.replicates = 0\n")), ConfigInvalid);
  CHECK_THROWS_AS(study_plan_from(KeyValueConfig::parse("sim.scenario = bogus\n")), ConfigInvalid);
  for (const auto& k : config_keys()) CHECK(k.find(' ') == std::string::npos);
}

TEST_CASE("replicate seeds are distinct") {
  std::set<std::uint64_t> seen;
  for (Scenario s : all_scenarios())
    for (int k = 0; k < 50; ++k) seen.insert(replicate_seed(1, s, k));
  CHECK(seen.size() == 300);
  CHECK(replicate_seed(1, Scenario::none, 0) == replicate_seed(1, Scenario::none, 0));
  CHECK(replicate_seed(1, Scenario::none, 0) != replicate_seed(2, Scenario::none, 0));
}

TEST_CASE("cli usage errors") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"--version"}).code == 2);
  const auto dir = scratch_dir("cli_usage");
  const Run bogus = cli({"simulate", "--out", dir.string(), "--scenario", "bogus"});
  CHECK(bogus.code == 2);
  CHECK(bogus.err.find("none, moderate, strong, variable_visits, missing_followup, nonlinear") != std::string::npos);
  write(dir / "bad.cfg", "sampler.warmupp = 5\n");
  const Run unknown = cli({"simulate", "--out", dir.string(), "--config", (dir / "bad.cfg").string()});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("sampler.warmupp") != std::string::npos);
  write(dir / "empty.csv", "subject,visit,region,y\n");
  CHECK(cli({"fit", "--out", (dir / "f").string(), "--data", (dir / "empty.csv").string(), "--model",
             "cross_sectional"})
            .code == 2);
  CHECK(cli({"fit", "--out", (dir / "f").string(), "--data", (dir / "nope.csv").string()}).code == 2);
  CHECK(cli({"score", "--out", (dir / "s").string(), "--data", (dir / "empty.csv").string()}).code == 2);
}

TEST_CASE("cli simulate defaults and determinism") {
  const auto dir = scratch_dir("cli_sim");
  const Run a = cli({"simulate", "--out", (dir / "a").string(), "--seed", "11"});
  REQUIRE(a.code == 0);
  const LongDataset d = load_dataset((dir / "a" / "data.csv").string());
  CHECK(d.n_subjects() == 120);
  CHECK(d.n_regions() == 20);
  REQUIRE(cli({"simulate", "--out", (dir / "b").string(), "--seed", "11"}).code == 0);
  for (const char* f : {"data.csv", "graph.csv", "truth_u.csv", "truth_mu.csv", "truth.json"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  REQUIRE(cli({"simulate", "--out", (dir / "c").string(), "--seed", "12"}).code == 0);
  CHECK(slurp(dir / "a" / "data.csv") != slurp(dir / "c" / "data.csv"));

  const auto m = json_file(dir / "a" / "manifest.json");
  CHECK(m["command"] == "simulate");
  CHECK(m["seed"] == 11);
  CHECK(m["version"] == std::string(version));
  CHECK(m["outputs"].size() == 5);
  CHECK(m.contains("config_digest"));
}

TEST_CASE("cli fit, score and evaluate on a small simulation") {
  const auto dir = scratch_dir("cli_pipeline");
  write(dir / "small.cfg", small_config);
  const std::string cfg = (dir / "small.cfg").string();
  const std::string sim = (dir / "sim").string(), data = sim + "/data.csv", graph = sim + "/graph.csv";
  REQUIRE(cli({"simulate", "--out", sim, "--config", cfg}).code == 0);

  SUBCASE("spatial") {
    const Run f = cli({"fit", "--out", (dir / "fit").string(), "--config", cfg, "--data", data, "--graph", graph});
    REQUIRE_MESSAGE(f.code == 0, f.err);
    const auto diag = json_file(dir / "fit" / "diagnostics.json");
    CHECK(diag["max_rhat"].get<double>() < 1.1);
    const auto summary = slurp(dir / "fit" / "summary.json");
    CHECK(summary.find("tau_u") != std::string::npos);
    CHECK(summary.find("rho") != std::string::npos);

    for (const char* mode : {"conditional", "marginal"}) {
      const Run s = cli({"score", "--out", (dir / "score").string(), "--config", cfg, "--data", data, "--fit",
                         (dir / "fit").string(), "--score-mode", mode});
      REQUIRE_MESSAGE(s.code == 0, s.err);
      CHECK(s.out.find(mode) != std::string::npos);
      for (const char* out : {"z_scores.csv", "burden.csv", "region_tail.csv", "u_summary.csv", "manifest.json"})
        CHECK(fs::exists(dir / "score" / out));
    }
    const Run e = cli({"evaluate", "--out", (dir / "eval").string(), "--config", cfg, "--data", data, "--fit",
                       (dir / "fit").string(), "--truth", sim});
    REQUIRE_MESSAGE(e.code == 0, e.err);
    const auto metrics = json_file(dir / "eval" / "metrics.json");
    CHECK(metrics["model"] == "spatial");
    for (const char* k : {"bias", "mse", "map_mse", "z_mean", "z_var", "tail_prob", "auc"})
      CHECK(metrics["metrics"].contains(k));
  }

  SUBCASE("longitudinal summary has no spatial parameters") {
    const Run f = cli({"fit", "--out", (dir / "lfit").string(), "--data", data, "--model", "longitudinal"});
    REQUIRE_MESSAGE(f.code == 0, f.err);
    const auto summary = json_file(dir / "lfit" / "summary.json");
    CHECK(summary.contains("sigma_b"));
    CHECK_FALSE(summary.contains("tau_u"));
    CHECK_FALSE(summary.contains("rho"));
    const Run s = cli({"score", "--out", (dir / "lscore").string(), "--data", data, "--fit", (dir / "lfit").string()});
    CHECK(s.code == 0);
    CHECK_FALSE(fs::exists(dir / "lscore" / "u_summary.csv"));
    const Run e = cli({"evaluate", "--out", (dir / "leval").string(), "--data", data, "--fit",
                       (dir / "lfit").string(), "--truth", sim});
    CHECK(e.code == 0);
  }

  SUBCASE("spatial fit requires every region in the graph") {
    std::string edges = slurp(graph);
    std::istringstream in(edges);
    std::string line, kept;
    const std::string victim = "R6";
    while (std::getline(in, line))
      if (line.find(victim) == std::string::npos) kept += line + "\n";
    write(dir / "cut.csv", kept);
    const Run f = cli({"fit", "--out", (dir / "cut").string(), "--config", cfg, "--data", data, "--graph",
                       (dir / "cut.csv").string()});
    CHECK(f.code == 2);
    CHECK(f.err.find("'R6'") != std::string::npos);
    CHECK(cli({"fit", "--out", (dir / "nog").string(), "--data", data}).code == 2);
  }

  SUBCASE("scoring against mismatched regions fails") {
    REQUIRE(cli({"fit", "--out", (dir / "cs").string(), "--data", data, "--model", "cross_sectional"}).code == 0);
    write(dir / "other.cfg", "sim.n_subjects = 5\nsim.n_regions = 4\n");
    REQUIRE(cli({"simulate", "--out", (dir / "other").string(), "--config", (dir / "other.cfg").string()}).code == 0);
    const Run s = cli({"score", "--out", (dir / "x").string(), "--data", (dir / "other" / "data.csv").string(),
                       "--fit", (dir / "cs").string()});
    CHECK(s.code == 2);
  }
}

TEST_CASE("cli oracle scores are calibrated") {
  const auto dir = scratch_dir("cli_oracle");
  const std::string sim = (dir / "sim").string();
  REQUIRE(cli({"simulate", "--out", sim, "--seed", "5"}).code == 0);
  const Run e = cli({"evaluate", "--out", (dir / "eval").string(), "--data", sim + "/data.csv", "--oracle", sim});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  const auto metrics = json_file(dir / "eval" / "metrics.json");
  CHECK(metrics["model"] == "oracle");
  const double z_var = metrics["metrics"]["z_var"].get<double>();
  CHECK(z_var >= 0.95);
  CHECK(z_var <= 1.05);
  const Run s = cli({"score", "--out", (dir / "score").string(), "--data", sim + "/data.csv", "--oracle", sim});
  CHECK(s.code == 0);
}

TEST_CASE("cli replicate study resumes from completed replicates") {
  const auto dir = scratch_dir("cli_rep");
  write(dir / "rep.cfg",
        "seed = 3\nsim.n_subjects = 10\nsim.n_regions = 6\nsampler.chains = 2\nsampler.warmup = 100\n"
        "sampler.samples = 100\nscore.draws = 20\nstudy.replicates = 2\nstudy.scenarios = none, strong\n");
  const std::string cfg = (dir / "rep.cfg").string(), out = (dir / "out").string();
  const Run first = cli({"replicate", "--out", out, "--config", cfg});
  REQUIRE_MESSAGE(first.code == 0, first.err);
  CHECK(first.out.find("4 total, 4 computed, 0 resumed, 0 failed") != std::string::npos);
  const std::string table1 = slurp(dir / "out" / "table1.csv");
  CHECK(table1.rfind("scenario,model,bias,bias_se,mse,mse_se,map_mse,map_mse_se,n\n", 0) == 0);
  for (const char* f : {"table2.csv", "detection.csv", "summary_long.csv", "failures.txt", "manifest.json"})
    CHECK(fs::exists(dir / "out" / f));

  fs::remove(dir / "out" / "rep_none_1.json");
  fs::remove(dir / "out" / "rep_strong_0.json");
  const Run second = cli({"replicate", "--out", out, "--config", cfg});
  REQUIRE(second.code == 0);
  CHECK(second.out.find("4 total, 2 computed, 2 resumed, 0 failed") != std::string::npos);
  CHECK(slurp(dir / "out" / "table1.csv") == table1);
  CHECK(slurp(dir / "out" / "summary_long.csv").find("strong,spatial,map_mse") != std::string::npos);

  const Run only = cli({"replicate", "--out", (dir / "lg").string(), "--config", cfg, "--model", "longitudinal",
                        "--scenario", "none"});
  REQUIRE(only.code == 0);
  CHECK(slurp(dir / "lg" / "table1.csv").find("spatial") == std::string::npos);
  CHECK(cli({"replicate", "--out", out, "--config", cfg, "--jobs", "0"}).code == 2);
}
