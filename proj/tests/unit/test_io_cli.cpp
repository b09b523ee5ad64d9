#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "prefsamp/cli.hpp"
#include "prefsamp/csv.hpp"
#include "prefsamp/errors.hpp"
#include "prefsamp/io.hpp"

using namespace prefsamp;
namespace fs = std::filesystem;

namespace {

void put(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

CovariateSeries five_days() { return testutil::design({0, 1, 2, 3, 4}); }

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return read_file(p); }

}  // namespace

TEST_CASE("observation loading") {
  const auto dir = testutil::scratch_dir("obs");
  const auto cov = five_days();
  SUBCASE("effort defaults to one and species keep first-appearance order") {
    put(dir / "o.csv", "day,species,count\n2,b,3\n2,a,1\n4,b,0\n4,a,5\n");
    const auto o = load_observations(dir / "o.csv", cov);
    CHECK(o.species == std::vector<std::string>{"b", "a"});
    CHECK(o.set.observed_days == std::vector<Index>{1, 3});
    CHECK(o.set.effort == Eigen::Vector2d(1.0, 1.0));
    CHECK(o.set.counts(1, 1) == 5);
    CHECK(o.set.tau == std::vector<std::uint8_t>{0, 1, 0, 1, 0});
  }
  SUBCASE("trap fraction times duration") {
    put(dir / "o.csv", "day,species,count,trap_fraction,duration_days\n1,a,3,0.5,2\n3,a,1,0.25,4\n");
    const auto o = load_observations(dir / "o.csv", cov);
    CHECK(o.set.effort(0) == doctest::Approx(1.0));
    CHECK(o.set.trap_fraction.has_value());
  }
  SUBCASE("errors name the problem") {
    put(dir / "o.csv", "day,species,count\n2,a,3\n2,a,4\n");
    CHECK_THROWS_WITH_AS(load_observations(dir / "o.csv", cov), doctest::Contains("2"), ValidationError);
    put(dir / "o.csv", "day,species,count\n9,a,3\n");
    CHECK_THROWS_AS(load_observations(dir / "o.csv", cov), ValidationError);
    put(dir / "o.csv", "day,species,count,effort\n2,a,3,0\n");
    CHECK_THROWS_AS(load_observations(dir / "o.csv", cov), ValidationError);
    put(dir / "o.csv", "day,species,count\n2,a,-1\n");
    CHECK_THROWS_AS(load_observations(dir / "o.csv", cov), Error);
    put(dir / "o.csv", "day,species\n2,a\n");
    CHECK_THROWS_AS(load_observations(dir / "o.csv", cov), Error);
    put(dir / "o.csv", "day,species,count\n2,a,1\n2,b,1\n3,a,1\n");
    CHECK_THROWS_AS(load_observations(dir / "o.csv", cov), ValidationError);
    CHECK_THROWS_AS(load_observations(dir / "missing.csv", cov), Error);
  }
}

TEST_CASE("dropping zero days") {
  ObservationSet o;
  o.tau = {1, 1, 0, 1};
  o.observed_days = {0, 1, 3};
  o.counts.resize(2, 3);
  o.counts << 0, 0, 1, 0, 2, 0;
  o.effort = Eigen::Vector3d(1, 2, 3);
  const auto d = drop_zero_days(o);
  CHECK(d.observed_days == std::vector<Index>{1, 3});
  CHECK(d.tau == std::vector<std::uint8_t>{0, 1, 0, 1});
  CHECK(d.effort == Eigen::Vector2d(2, 3));
  CHECK(d.counts(1, 0) == 2);
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("round trips") {
  const auto dir = testutil::scratch_dir("roundtrip");
  auto cov = five_days();
  cov.dates = {"2020-01-01", "2020-01-02", "2020-01-03", "2020-01-04", "2020-01-05"};
  cov.values(2, 1) = 0.1 + 0.2;
  put(dir / "c.csv", covariates_csv(cov));
  const auto back = load_covariates(dir / "c.csv");
  CHECK(back.values == cov.values);
  CHECK(back.dates == cov.dates);
  CHECK(back.names == cov.names);

  LatentState s;
  s.log_lambda = Eigen::MatrixXd::Random(2, 5);
  put(dir / "t.csv", truth_csv(s, cov));
  CHECK(load_truth(dir / "t.csv", cov).log_lambda == s.log_lambda);
}

TEST_CASE("fuzzed observation files fail cleanly") {
  const auto dir = testutil::scratch_dir("fuzz");
  const auto cov = testutil::design(std::vector<double>(20, 1.0));
  std::string good = "day,species,count,effort\n";
  for (int d = 1; d <= 20; d += 2) good += std::to_string(d) + ",a," + std::to_string(d % 7) + ",1.5\n";
  std::mt19937_64 eng(99);
  const std::string alphabet = "0123456789,.-e\nabxyz \t";
  int ok = 0, rejected = 0;
  for (int rep = 0; rep < 200; ++rep) {
    std::string s = good;
    const int edits = 1 + static_cast<int>(eng() % 4);
    for (int e = 0; e < edits; ++e) {
      const std::size_t pos = eng() % s.size();
      switch (eng() % 3) {
        case 0: s.erase(pos, 1); break;
        case 1: s[pos] = alphabet[eng() % alphabet.size()]; break;
        default: s.insert(pos, 1, alphabet[eng() % alphabet.size()]);
      }
    }
    put(dir / "o.csv", s);
    try {
      const auto o = load_observations(dir / "o.csv", cov);
      o.set.validate();
      ++ok;
    } catch (const Error&) {
      ++rejected;
    }
  }
  CHECK(ok + rejected == 200);
  CHECK(rejected > 0);
}

TEST_CASE("command line pipeline") {
  const auto dir = testutil::scratch_dir("cli");
  const std::string data = (dir / "data").string();
  auto r = cli({"simulate", "--out", data, "--seed", "4", "--years", "1", "--mechanism", "logistic",
                "--logit-intercept", "-2", "--logit-slope", "0.3", "--alpha", "0.8", "--beta", "0.5", "0.2"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* f : {"covariates.csv", "truth.csv", "counts_full.csv", "observations.csv", "tau.csv", "meta.ini",
                        "resolved_config.ini"})
    CHECK(fs::exists(fs::path(data) / f));

  const std::vector<std::string> fit_common{"--data", data, "--iterations", "60", "--burn-in", "20",
                                            "--thin", "2", "--seed", "5", "--rhat-limit", "1000"};
  auto fit = [&](const std::string& variant, const std::string& out) {
    std::vector<std::string> a{"fit", "--out", out, "--variant", variant};
    a.insert(a.end(), fit_common.begin(), fit_common.end());
    return cli(a);
  };
  const std::string pref = (dir / "pref").string();
  const std::string non = (dir / "non").string();
  r = fit("pref", pref);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = fit("nonpref", non);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto header = slurp(fs::path(non) / "draws_params.csv").substr(0, 80);
  CHECK(header.find("theta") == std::string::npos);
  CHECK(slurp(fs::path(pref) / "draws_params.csv").find("theta1") != std::string::npos);

  SUBCASE("byte-identical reruns") {
    const std::string again = (dir / "pref2").string();
    REQUIRE(fit("pref", again).code == 0);
    for (const char* f : {"draws_params.csv", "draws_loglambda.csv", "abundance_mean.csv", "fit_meta.ini"})
      CHECK(slurp(fs::path(pref) / f) == slurp(fs::path(again) / f));
  }
  SUBCASE("derive and compare") {
    const std::string dp = (dir / "dp").string(), dn = (dir / "dn").string();
    const std::string truth = (fs::path(data) / "truth.csv").string();
    REQUIRE(cli({"derive", "--draws", pref, "--out", dp, "--truth", truth}).code == 0);
    REQUIRE(cli({"derive", "--draws", non, "--out", dn, "--truth", truth}).code == 0);
    for (const char* f : {"summary.csv", "growth.csv", "psi.csv", "psi_summary.csv", "rmse.csv", "derive_meta.ini"})
      CHECK(fs::exists(fs::path(dp) / f));
    CHECK(fs::exists(fs::path(dp) / "theta1.csv"));
    CHECK_FALSE(fs::exists(fs::path(dn) / "theta1.csv"));
    const std::string table = (dir / "cmp.csv").string();
    r = cli({"compare", dp, dn, "--out", table});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto text = slurp(table);
    CHECK(text.rfind("mechanism,non_preferential_rmse,preferential_rmse,theta1_lower,theta1_upper,theta1_p_positive\n",
                     0) == 0);
    CHECK(text.find("logistic,") != std::string::npos);
    // Same variant twice is rejected.
    CHECK(cli({"compare", dp, dp, "--out", table}).code == exit_code::validation);
  }
  SUBCASE("fingerprint mismatch across datasets") {
    const std::string other = (dir / "data2").string();
    REQUIRE(cli({"simulate", "--out", other, "--seed", "5", "--years", "1", "--mechanism", "logistic",
                 "--logit-intercept", "-2", "--logit-slope", "0.3", "--alpha", "0.8", "--beta", "0.5", "0.2"})
                .code == 0);
    const std::string fo = (dir / "fo").string();
    std::vector<std::string> a{"fit", "--out", fo, "--variant", "nonpref", "--data", other, "--iterations", "30",
                               "--burn-in", "10", "--thin", "2", "--rhat-limit", "1000"};
    REQUIRE(cli(a).code == 0);
    const std::string dp = (dir / "dp").string(), dother = (dir / "dother").string();
    REQUIRE(cli({"derive", "--draws", pref, "--out", dp}).code == 0);
    REQUIRE(cli({"derive", "--draws", fo, "--out", dother}).code == 0);
    r = cli({"compare", dp, dother, "--out", (dir / "x.csv").string()});
    CHECK(r.code == exit_code::validation);
    CHECK_FALSE(fs::exists(dir / "x.csv"));
  }
  SUBCASE("derive with no stored draws writes nothing") {
    const std::string empty = (dir / "empty").string();
    fs::create_directories(empty);
    for (const auto& e : fs::directory_iterator(pref)) fs::copy(e.path(), fs::path(empty) / e.path().filename());
    // Keep only the header line of the draw files.
    for (const char* f : {"draws_params.csv", "draws_loglambda.csv"}) {
      const auto text = slurp(fs::path(empty) / f);
      put(fs::path(empty) / f, text.substr(0, text.find('\n') + 1));
    }
    const std::string out = (dir / "dempty").string();
    r = cli({"derive", "--draws", empty, "--out", out});
    CHECK(r.code == exit_code::validation);
    CHECK((!fs::exists(out) || fs::is_empty(out)));
  }
  SUBCASE("usage errors") {
    CHECK(cli({"fit", "--out", (dir / "z").string()}).code == exit_code::validation);
    CHECK(cli({"fit", "--data", data, "--out", (dir / "z").string(), "--burn-in", "100", "--iterations", "50"}).code ==
          exit_code::validation);
    CHECK(cli({"simulate", "--out", (dir / "s").string(), "--mechanism", "sometimes"}).code ==
          exit_code::validation);
    CHECK(cli({"bogus"}).code != 0);
  }
  SUBCASE("convergence limit") {
    std::vector<std::string> a{"fit", "--out", (dir / "strict").string(), "--variant", "nonpref", "--data", data,
                               "--iterations", "40", "--burn-in", "10", "--thin", "1", "--chains", "2",
                               "--rhat-limit", "1.0000001"};
    CHECK(cli(a).code == exit_code::convergence);
  }
}

TEST_CASE("covariates command") {
  const auto dir = testutil::scratch_dir("covcmd");
  std::string env = "day,tmean_c,date\n";
  for (int d = 1; d <= 30; ++d) env += std::to_string(d) + "," + std::to_string(5 + d) + ",2021-04-" + (d < 10 ? "0" : "") + std::to_string(d) + "\n";
  put(dir / "env.csv", env);
  auto r = cli({"covariates", "--input", (dir / "env.csv").string(), "--output", (dir / "cov.csv").string(), "--kernel",
                "gdd=3"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto cov = load_covariates(dir / "cov.csv");
  CHECK(cov.names == std::vector<std::string>{"intercept", "gdd3"});
  // Day 10: mean of GDD on days 7..9 = (2 + 3 + 4) / 3.
  CHECK(cov.values(9, 1) == doctest::Approx(3.0));
  r = cli({"covariates", "--input", (dir / "env.csv").string(), "--output", (dir / "cov.csv").string(), "--kernel",
           "gdd=40"});
  CHECK(r.code == exit_code::validation);
}

TEST_CASE("bundled synthetic temperature file matches the built-in series") {
  const fs::path file = fs::path(PREFSAMP_SOURCE_DIR) / "data" / "synthetic_temperature_2014_2016.csv";
  REQUIRE(fs::is_regular_file(file));
  const auto dir = testutil::scratch_dir("bundled");
  auto r = cli({"simulate", "--out", (dir / "a").string(), "--seed", "5"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = cli({"simulate", "--out", (dir / "b").string(), "--seed", "5", "--temperature", file.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* name : {"covariates.csv", "truth.csv", "observations.csv"})
    CHECK_MESSAGE(slurp(dir / "a" / name) == slurp(dir / "b" / name), name);
}
