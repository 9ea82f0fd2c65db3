#include <doctest.h>

#include <sstream>

#include "cafp/cli.hpp"
#include "cafp/random.hpp"
#include "test_util.hpp"

using namespace cafp;
using cafp::testing::write_temp;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "cafp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct Fixture {
  std::string csv;
  std::string schema;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Rng rng(8);
    std::ostringstream os;
    os << "score,kind,grp,label\n";
    for (int i = 0; i < 400; ++i) {
      const bool male = rng.bernoulli(0.5);
      const double s = rng.normal() + (male ? 0.5 : 0.0);
      const char* kind = rng.bernoulli(0.3) ? "b" : (rng.bernoulli(0.5) ? "a" : "c");
      const bool pos = rng.bernoulli(1.0 / (1.0 + std::exp(-(s + (male ? 0.7 : -0.3)))));
      os << s << ',' << kind << ',' << (male ? "M" : "F") << ',' << (pos ? "yes" : "no") << '\n';
    }
    const auto csv = write_temp("cli.csv", os.str());
    const auto schema = write_temp("cli_schema.json", R"({
      "name": "cli_toy", "target_column": "label", "positive_label": "yes",
      "protected_column": "grp", "privileged_value": "M",
      "features": [{"name": "score", "kind": "numeric"}, {"name": "kind", "kind": "categorical"}]
    })");
    return Fixture{csv.string(), schema.string()};
  }();
  return f;
}

std::vector<std::string> data_args() { return {"--dataset", fixture().csv, "--schema", fixture().schema}; }

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("audit happy path") {
  const auto r = run(with({"audit", "--repeats", "2", "--reproducible"}, data_args()));
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j.at("rows").size() == 2);
  CHECK(j.at("succeeded") == 2);
  CHECK_FALSE(j.contains("generated_at"));
}

TEST_CASE("reproducible output is byte identical") {
  const auto args = with({"audit", "--repeats", "2", "--reproducible", "--postproc", "eqodds", "--postproc", "cafp"},
                         data_args());
  const auto a = run(args);
  const auto b = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run(with({"audit", "--model", "quantum"}, data_args())).code == 2);
  CHECK(run(with({"audit", "--bogus-flag"}, data_args())).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"audit"}).code == 2);
  CHECK(run(with({"audit", "--train-fraction", "1.5"}, data_args())).code == 2);
}

TEST_CASE("help exits with 0") {
  const auto r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("audit") != std::string::npos);
  CHECK(run({"audit", "--help"}).code == 0);
}

TEST_CASE("missing dataset exits with 1 and names the path") {
  const auto r = run({"audit", "--dataset", "/no/such/file.csv", "--schema", fixture().schema});
  CHECK(r.code == 1);
  CHECK(r.err.find("/no/such/file.csv") != std::string::npos);
}

TEST_CASE("output files") {
  const auto out = write_temp("report.json", "");
  const auto csv = write_temp("report.csv", "");
  const auto r = run(with({"sweep", "--repeats", "2", "--out", out.string(), "--csv", csv.string()}, data_args()));
  REQUIRE(r.code == 0);
  std::ifstream in(out);
  const auto j = Json::parse(in);
  CHECK(j.at("sweep").at("thresholds").size() == 25);
  std::ifstream cin(csv);
  std::string header;
  std::getline(cin, header);
  CHECK(header.rfind("threshold,", 0) == 0);
}

TEST_CASE("ablate and certify") {
  const auto ab = run(with({"ablate", "--repeats", "2"}, data_args()));
  REQUIRE(ab.code == 0);
  CHECK(Json::parse(ab.out).at("ablation").at("rows").size() == 3);

  const auto model_path = write_temp("model.json", "");
  const auto c1 = run(with({"certify", "--model-out", model_path.string()}, data_args()));
  REQUIRE(c1.code == 0);
  const auto j1 = Json::parse(c1.out);
  CHECK(j1.at("bound").get<double>() == std::max(j1.at("b0").get<double>(), j1.at("b1").get<double>()));
  CHECK(j1.at("identity_error").get<double>() < 1e-12);

  const auto c2 = run(with({"certify", "--model-in", model_path.string()}, data_args()));
  REQUIRE(c2.code == 0);
  const auto j2 = Json::parse(c2.out);
  CHECK(j2.at("bound") == j1.at("bound"));
  CHECK(j2.at("model_id") == j1.at("model_id"));
}

TEST_CASE("synthcheck exit status follows the ledger") {
  const auto ok = run({"synthcheck", "--n", "5000"});
  CHECK(ok.code == 0);
  CHECK(Json::parse(ok.out).at("all_passed") == true);
  CHECK(run({"synthcheck", "--n", "10"}).code == 2);
}

TEST_CASE("latency subcommand") {
  const auto r = run(with({"latency", "--batch", "100", "--trials", "20"}, data_args()));
  REQUIRE(r.code == 0);
  CHECK(Json::parse(r.out).at("latency").at("ratio").get<double>() > 0.0);
}
