#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sandwich/cli.hpp"

using namespace sandwich;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) { return std::string(SANDWICH_FIXTURES) + "/" + name; }

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    unsetenv("SANDWICH_SEED");
    dir_ = fs::temp_directory_path() / ("sandwich_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override {
    unsetenv("SANDWICH_SEED");
    fs::remove_all(dir_);
  }
  fs::path write(const std::string& name, const json& doc) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << doc.dump(2);
    return p;
  }
  static json load(const std::string& name) {
    std::ifstream f(fixture(name));
    return json::parse(f);
  }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ValidatePasses) {
  const auto r = run({"validate", "--input", fixture("fixc_linear.json")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ALL CHECKS PASSED"), std::string::npos);
}

TEST_F(Cli, PricePrintsValueAndDensity) {
  const auto r = run({"price", "--input", fixture("fixc_linear.json"), "--from", "0", "--to", "2", "--payoff", "uu"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("0.25"), std::string::npos);
  const auto b = run({"price", "--input", fixture("fixb.json"), "--from", "0", "--to", "1", "--payoff", "a"});
  EXPECT_EQ(b.code, 0) << b.err;
  EXPECT_NE(b.out.find("0.4166666667"), std::string::npos) << b.out;
  EXPECT_NE(b.out.find("1.25"), std::string::npos);
}

TEST_F(Cli, FailedChecksExitOne) {
  const auto r = run({"validate", "--input", fixture("negative_density.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
  EXPECT_NE(r.out.find("SOME CHECKS FAILED"), std::string::npos);

  // the report is still written
  const auto out = dir_ / "fail.json";
  EXPECT_EQ(run({"report", "--input", fixture("negative_density.json"), "--output", out.string()}).code, 1);
  const json doc = json::parse(slurp(out));
  EXPECT_EQ(doc["status"], "fail");
  EXPECT_NE(doc["error"].get<std::string>().find("pair (0, 1)"), std::string::npos);
}

TEST_F(Cli, ViolatedSandwichStopsExtensionWithExitOne) {
  json doc = load("fixa.json");
  doc["bounds"][0]["m0"] = json::array({1, 1});
  doc["bounds"][0]["M0"] = json::array({1, 1});
  const auto p = write("pinched.json", doc);
  EXPECT_EQ(run({"validate", "--input", p.string()}).code, 1);
  const auto e = run({"extend", "--input", p.string()});
  EXPECT_EQ(e.code, 1);
  EXPECT_NE(e.err.find("sandwich"), std::string::npos) << e.err;
}

TEST_F(Cli, MalformedInputNamesThePath) {
  const auto r = run({"validate", "--input", fixture("malformed.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/operators/0/pieces/0/density"), std::string::npos) << r.err;
}

TEST_F(Cli, UnknownFieldIsRejected) {
  json doc = load("fixa.json");
  doc["operators"][0]["pieces"][0]["weight"] = 1;
  const auto r = run({"validate", "--input", write("extra.json", doc).string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/operators/0/pieces/0"), std::string::npos) << r.err;
}

TEST_F(Cli, EmptyDensitySetNamesPairAndBlock) {
  json doc = load("fixa.json");
  doc["bounds"][0]["m0"] = json::array({1.2, 1.2});
  doc["bounds"][0]["M0"] = json::array({1.5, 1.5});
  const auto r = run({"extend", "--input", write("empty.json", doc).string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("pair (0, 1)"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("block 0"), std::string::npos) << r.err;
}

TEST_F(Cli, InputErrorsExitTwo) {
  EXPECT_EQ(run({"validate", "--input", (dir_ / "missing.json").string()}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"validate"}).code, 2);
  EXPECT_EQ(run({"price", "--input", fixture("fixa.json"), "--from", "0", "--to", "1", "--payoff", "1,2,3"}).code, 2);
  EXPECT_EQ(run({"price", "--input", fixture("fixa.json"), "--from", "0", "--to", "1", "--payoff", "nope"}).code, 2);
  EXPECT_EQ(run({"price", "--input", fixture("fixa.json"), "--from", "1", "--to", "0", "--payoff", "x"}).code, 2);
  EXPECT_EQ(run({"check", "--input", fixture("fixa.json"), "--suite", "refine"}).code, 2);
  EXPECT_EQ(run({"check", "--input", fixture("fixa.json"), "--suite", "bogus"}).code, 2);
  EXPECT_EQ(run({"validate", "--input", fixture("fixa.json"), "--tol", "-1"}).code, 2);
  setenv("SANDWICH_SEED", "twelve", 1);
  EXPECT_EQ(run({"validate", "--input", fixture("fixa.json")}).code, 2);
}

TEST_F(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("validate"), std::string::npos);
}

TEST_F(Cli, InlinePayoffVector) {
  const auto r = run({"price", "--input", fixture("fixa.json"), "--from", "0", "--to", "1", "--payoff", "2,0"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("1.25"), std::string::npos);
}

TEST_F(Cli, EverySuiteRuns) {
  for (const char* suite : {"representation", "sandwich", "cocycle", "refine"}) {
    const auto r = run({"check", "--input", fixture("fixc_restricted.json"), "--suite", suite});
    EXPECT_EQ(r.code, 0) << suite << ": " << r.err << r.out;
  }
  const auto r = run({"check", "--input", fixture("fixc_refine.json"), "--suite", "refine"});
  EXPECT_NE(r.out.find("strict decrease witnessed"), std::string::npos) << r.out;
}

TEST_F(Cli, ReportIsDeterministicAndWellFormed) {
  setenv("SANDWICH_SEED", "42", 1);
  for (const char* name : {"fixa.json", "fixc_restricted.json", "fixc_polyhedral.json"}) {
    const auto a = dir_ / "a.json", b = dir_ / "b.json";
    const auto ra = run({"report", "--input", fixture(name), "--output", a.string()});
    const auto rb = run({"report", "--input", fixture(name), "--output", b.string()});
    EXPECT_EQ(ra.code, 0) << name << ra.err;
    EXPECT_EQ(ra.out, rb.out);
    const std::string ja = slurp(a), jb = slurp(b);
    EXPECT_EQ(ja, jb) << name;
    const json doc = json::parse(ja);
    EXPECT_EQ(doc["schema_version"], "1");
    EXPECT_EQ(doc["command"], "report");
    EXPECT_EQ(doc["seed"], 42);
    EXPECT_EQ(doc["status"], "pass");
    for (const char* key : {"validation", "extension", "prices", "suites", "scenario", "tolerance"})
      EXPECT_TRUE(doc.contains(key)) << key;
  }
}

TEST_F(Cli, NumbersHaveTenSignificantDigits) {
  const auto out = dir_ / "b.json";
  ASSERT_EQ(run({"price", "--input", fixture("fixb.json"), "--from", "0", "--to", "1", "--payoff", "a",
                 "--output", out.string()})
                .code,
            0);
  const json doc = json::parse(slurp(out));
  EXPECT_EQ(doc["prices"][0]["blocks"][0]["value"].get<double>(), 0.4166666667);
  EXPECT_EQ(cli::fmt(1.0 / 3), "0.3333333333");
  EXPECT_EQ(cli::num(-0.0).dump(), "0.0");
  EXPECT_EQ(cli::num(kInf), json("inf"));
}

TEST_F(Cli, EchoedScenarioRoundTrips) {
  const auto out = dir_ / "r.json";
  ASSERT_EQ(run({"validate", "--input", fixture("fixc_restricted.json"), "--output", out.string()}).code, 0);
  const json doc = json::parse(slurp(out));
  const auto echoed = write("echo.json", doc["scenario"]);
  const auto again = dir_ / "r2.json";
  ASSERT_EQ(run({"validate", "--input", echoed.string(), "--output", again.string()}).code, 0);
  const json doc2 = json::parse(slurp(again));
  EXPECT_EQ(doc["validation"], doc2["validation"]);
  EXPECT_EQ(doc["scenario"], doc2["scenario"]);
}
