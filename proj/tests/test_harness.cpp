#include <doctest.h>

#include <cmath>

#include "cafp/errors.hpp"
#include "cafp/harness.hpp"
#include "test_util.hpp"

using namespace cafp;

namespace {

Dataset small_synthetic(double shift = 0.8) {
  SyntheticConfig sc;
  sc.seed = 17;
  sc.n = 1500;
  sc.feature_shift = shift;
  return make_synthetic(sc, 0);
}

ExperimentConfig quick_config() {
  ExperimentConfig cfg;
  cfg.repeats = 3;
  cfg.seed = 5;
  cfg.logistic.max_iters = 300;
  return cfg;
}

// Does a fixed amount of arithmetic per row so scoring cost dominates.
class BusyModel final : public ProbClassifier {
 public:
  [[nodiscard]] std::size_t n_features() const override { return 2; }
  [[nodiscard]] double predict_proba(std::span<const double> x, std::uint8_t a) const override {
    double z = 0.1 * a + x[0];
    for (int k = 0; k < 400; ++k) z = z * 0.999 + 0.25 + x[k % 2];
    return 1.0 / (1.0 + std::exp(-z * 1e-3));
  }
  [[nodiscard]] std::string kind() const override { return "busy"; }
  [[nodiscard]] Json to_json() const override { return Json::object(); }
};

}  // namespace

TEST_CASE("summary statistics for two values") {
  const std::vector<double> v{0.9, 0.8};
  const auto s = summarize(v);
  CHECK(s.n == 2);
  CHECK(s.mean == doctest::Approx(0.85));
  CHECK(s.sd == doctest::Approx(std::sqrt(0.005)).epsilon(1e-12));
  CHECK(s.sd == doctest::Approx(0.0707).epsilon(1e-3));
  CHECK(s.ci_high - s.mean == doctest::Approx(1.96 * std::sqrt(0.005) / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(s.ci_high - s.mean == doctest::Approx(0.098).epsilon(1e-3));
  CHECK(s.mean - s.ci_low == doctest::Approx(s.ci_high - s.mean).epsilon(1e-12));
}

TEST_CASE("a single repeat collapses the interval") {
  const std::vector<double> v{0.42};
  const auto s = summarize(v);
  CHECK(s.sd == 0.0);
  CHECK(s.ci_low == 0.42);
  CHECK(s.ci_high == 0.42);
}

TEST_CASE("summary does not depend on input order") {
  const std::vector<double> a{0.1, 0.7, 0.3, 1e-9, 0.55};
  const std::vector<double> b{0.55, 1e-9, 0.3, 0.7, 0.1};
  const auto sa = summarize(a);
  const auto sb = summarize(b);
  CHECK(sa.mean == sb.mean);
  CHECK(sa.sd == sb.sd);
}

TEST_CASE("sweep thresholds") {
  const auto t = sweep_thresholds();
  REQUIRE(t.size() == 25);
  CHECK(t.front() == doctest::Approx(0.01));
  CHECK(t.back() == doctest::Approx(0.99));
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] - t[i - 1] == doctest::Approx(0.98 / 24));
}

TEST_CASE("configuration validation") {
  auto cfg = quick_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.model = "svm";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = quick_config();
  cfg.repeats = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = quick_config();
  cfg.postprocs = {"none", "magic"};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = quick_config();
  cfg.train_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("prepared runs keep the three parts disjoint") {
  const auto ds = small_synthetic();
  const auto run = prepare_run(ds, quick_config(), 0);
  CHECK(run.fit.n() + run.validation.n() + run.test.n() == ds.n());
  CHECK(run.test.n() == 450);
  CHECK(run.validation.n() == 210);
  CHECK(run.model != nullptr);
}

TEST_CASE("experiment report") {
  const auto ds = small_synthetic();
  auto cfg = quick_config();
  cfg.postprocs = {"none", "cafp", "eqodds", "reject"};
  const auto report = run_experiment(ds, cfg);
  CHECK(report.succeeded == 3);
  REQUIRE(report.rows.size() == 4);
  const auto* cafp = report.row("cafp");
  REQUIRE(cafp != nullptr);
  CHECK(cafp->metrics.at("accuracy").n == 3);
  CHECK(cafp->metrics.at("identity_error").mean < 1e-12);
  CHECK(cafp->metrics.count("cert_bound") == 1);
  CHECK(report.row("none")->metrics.count("mi_nats") == 1);
  for (const auto& run : report.runs) {
    REQUIRE(run.certificate.has_value());
    CHECK(run.certificate->bound >= 0.0);
  }

  const auto j = report.to_json(true);
  CHECK_FALSE(j.contains("generated_at"));
  CHECK(j.at("certificates").size() == 3);
  CHECK(j.at("baselines").size() == 3);
  CHECK(report.to_json(false).contains("generated_at"));

  const auto again = run_experiment(ds, cfg);
  CHECK(again.to_json(true).dump() == j.dump());
  CHECK(again.to_csv() == report.to_csv());
  CHECK(report.to_csv().rfind("dataset,model,postproc,metric,mean,ci_low,ci_high,sd\n", 0) == 0);
}

TEST_CASE("ablation rows coincide for an attribute-blind model") {
  const auto ds = small_synthetic();
  auto cfg = quick_config();
  cfg.repeats = 2;
  cfg.logistic.max_iters = 0;  // all-zero weights, so f(x, 0) == f(x, 1)
  const auto res = ablation(ds, cfg);
  REQUIRE(res.rows.size() == 3);
  for (const auto& name : {"counterfactual", "averaged"}) {
    CHECK(res.row(name).accuracy == res.row("factual").accuracy);
    CHECK(res.row(name).dpd_signed == res.row("factual").dpd_signed);
    CHECK(res.row(name).aod_signed == res.row("factual").aod_signed);
  }
  CHECK(res.max_average_error == 0.0);
}

TEST_CASE("ablation on a trained model") {
  const auto ds = small_synthetic(0.0);
  auto cfg = quick_config();
  cfg.repeats = 2;
  const auto res = ablation(ds, cfg);
  CHECK(res.repeats == 2);
  CHECK(res.max_average_error < 1e-15);
  CHECK(std::abs(res.row("averaged").dpd_signed) < std::abs(res.row("factual").dpd_signed));
  CHECK(res.to_csv().find("averaged") != std::string::npos);
}

TEST_CASE("threshold sweep shapes") {
  const auto ds = small_synthetic();
  auto cfg = quick_config();
  cfg.repeats = 2;
  const auto res = threshold_sweep(ds, cfg);
  CHECK(res.repeats == 2);
  CHECK(res.base.balanced_accuracy.size() == 25);
  // at the lowest threshold nearly everyone is predicted positive
  CHECK(res.base.balanced_accuracy.front() < 0.6);
  for (std::size_t i = 1; i < 25; ++i) CHECK(res.eqodds.dpd_signed[i] == res.eqodds.dpd_signed[0]);
  CHECK(res.to_json().at("thresholds").size() == 25);
}

TEST_CASE("latency probe") {
  Matrix X(50, 2);
  const std::vector<std::uint8_t> a(50, 1);
  const BusyModel model;
  const auto res = latency_probe(model, X, a, 200);
  CHECK(res.batch == 200);
  CHECK(res.trials == 20);
  CHECK(res.ratio >= 1.5);
  CHECK(res.ratio <= 2.5);
  CHECK_THROWS_AS(latency_probe(model, X, a, 0), ConfigError);
  CHECK_THROWS_AS(latency_probe(model, X, a, 10, 19), ConfigError);
}

TEST_CASE("synthetic suite") {
  SUBCASE("premise holds") {
    SyntheticConfig sc;
    sc.seed = 3;
    const auto ledger = synthetic_theorem_suite(sc);
    CHECK(ledger.premise_holds);
    CHECK(ledger.all_passed());
    CHECK(ledger.entries.size() == 5);
    CHECK(ledger.protected_coefficient > 1.0);
  }
  SUBCASE("no protected effect") {
    SyntheticConfig sc;
    sc.a_coefficient = 0.0;
    const auto ledger = synthetic_theorem_suite(sc);
    CHECK(std::abs(ledger.protected_coefficient) < 0.15);
    CHECK(ledger.entry("distortion_identity").status == "pass");
    CHECK(ledger.certificate.bound < 0.02);
  }
  SUBCASE("feature shift breaks the premise") {
    SyntheticConfig sc;
    sc.feature_shift = 1.0;
    const auto ledger = synthetic_theorem_suite(sc);
    CHECK_FALSE(ledger.premise_holds);
    CHECK(ledger.entry("score_parity").status == "premise_violated");
    CHECK(ledger.entry("distortion_identity").status == "pass");
    CHECK(ledger.all_passed());
    CHECK(ledger.to_json().at("premise_holds") == false);
  }
  SUBCASE("too few rows") {
    SyntheticConfig sc;
    sc.n = 999;
    CHECK_THROWS_AS(synthetic_theorem_suite(sc), ConfigError);
  }
}
