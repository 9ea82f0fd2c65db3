#include <doctest.h>

#include <cmath>
#include <limits>

#include "cafp/errors.hpp"
#include "cafp/logistic.hpp"
#include "cafp/random.hpp"
#include "test_util.hpp"

using namespace cafp;
using cafp::testing::make_dataset;

namespace {

// Direct evaluation of the penalized mean log-loss, written independently of
// the library code.
double reference_loss(const Dataset& ds, const std::vector<double>& w, double b, double l2) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    double z = b + w.back() * ds.a[i];
    for (std::size_t j = 0; j < ds.d(); ++j) z += w[j] * ds.X(i, j);
    const double p = 1.0 / (1.0 + std::exp(-z));
    total -= ds.y[i] ? std::log(p) : std::log(1.0 - p);
  }
  double pen = 0.0;
  for (double v : w) pen += v * v;
  return total / static_cast<double>(ds.n()) + 0.5 * l2 * pen;
}

Dataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t d) {
  Rng rng(seed);
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  std::vector<std::uint8_t> a(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : rows[i]) v = rng.normal();
    a[i] = static_cast<std::uint8_t>(i % 2);
    y[i] = static_cast<std::uint8_t>(rng.bernoulli(0.4));
  }
  return make_dataset(rows, a, y);
}

}  // namespace

TEST_CASE("sigmoid values and stability") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) <= 1.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
  CHECK(sigmoid(-30.0) == doctest::Approx(std::exp(-30.0)).epsilon(1e-9));
}

TEST_CASE("zero iterations gives the uninformative model") {
  const auto ds = random_dataset(1, 50, 3);
  LogisticConfig cfg;
  cfg.max_iters = 0;
  const auto m = train_logistic(ds, cfg);
  for (std::size_t i = 0; i < ds.n(); ++i) CHECK(m.predict_proba(ds.X.row(i), ds.a[i]) == 0.5);
  CHECK(m.meta().iterations == 0);
}

TEST_CASE("loss matches a direct evaluation") {
  const auto ds = random_dataset(2, 40, 3);
  const std::vector<double> w{0.3, -0.2, 0.7, 0.5};
  CHECK(logistic_loss(ds, w, -0.1, 0.01) == doctest::Approx(reference_loss(ds, w, -0.1, 0.01)).epsilon(1e-12));
  CHECK(logistic_loss(ds, std::vector<double>(4, 0.0), 0.0, 0.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("gradient agrees with finite differences") {
  SUBCASE("at zero") {
    const auto ds = random_dataset(3, 30, 4);
    CHECK(logistic_gradient_check(ds, std::vector<double>(5, 0.0), 0.0, 0.01) < 1e-5);
  }
  SUBCASE("at random parameters") {
    const auto ds = random_dataset(4, 30, 4);
    Rng rng(9);
    std::vector<double> w(5);
    for (auto& v : w) v = rng.normal();
    CHECK(logistic_gradient_check(ds, w, rng.normal(), 0.05) < 1e-5);
  }
  SUBCASE("with a constant column") {
    auto ds = random_dataset(5, 30, 3);
    for (std::size_t i = 0; i < ds.n(); ++i) ds.X(i, 1) = 2.5;
    CHECK(logistic_gradient_check(ds, std::vector<double>{0.1, -0.4, 0.2, 0.3}, 0.2, 0.0) < 1e-5);
  }
}

TEST_CASE("training reaches the grid-search minimum") {
  // Non-separable 4-point problem; the penalty keeps the optimum interior.
  const auto ds = make_dataset({{-1.0}, {0.0}, {1.0}, {2.0}}, {0, 1, 0, 1}, {0, 1, 0, 1});
  const double l2 = 0.1;
  LogisticConfig cfg;
  cfg.l2_penalty = l2;
  cfg.max_iters = 50000;
  cfg.tolerance = 1e-10;
  const auto m = train_logistic(ds, cfg);

  double best = std::numeric_limits<double>::infinity();
  double bw = 0, ba = 0, bb = 0;
  auto scan = [&](double cw, double ca, double cb, double half, double step) {
    for (double w = cw - half; w <= cw + half + 1e-12; w += step) {
      for (double a = ca - half; a <= ca + half + 1e-12; a += step) {
        for (double b = cb - half; b <= cb + half + 1e-12; b += step) {
          const double l = reference_loss(ds, {w, a}, b, l2);
          if (l < best) best = l, bw = w, ba = a, bb = b;
        }
      }
    }
  };
  scan(0.0, 0.0, 0.0, 4.0, 0.05);
  scan(bw, ba, bb, 0.06, 0.002);

  CHECK(std::abs(m.weights()[0] - bw) < 1e-2);
  CHECK(std::abs(m.weights()[1] - ba) < 1e-2);
  CHECK(std::abs(m.bias() - bb) < 1e-2);
  CHECK(m.meta().final_loss <= best + 1e-9);
}

TEST_CASE("separable data is classified correctly") {
  const auto ds = make_dataset({{-3}, {-2}, {-1}, {1}, {2}, {3}}, {0, 1, 0, 1, 0, 1}, {0, 0, 0, 1, 1, 1});
  const auto m = train_logistic(ds);
  for (std::size_t i = 0; i < ds.n(); ++i) CHECK((m.predict_proba(ds.X.row(i), ds.a[i]) >= 0.5) == (ds.y[i] == 1));
}

TEST_CASE("loss history never increases") {
  const auto ds = random_dataset(6, 200, 5);
  LogisticConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.max_iters = 300;
  const auto m = train_logistic(ds, cfg);
  const auto& h = m.meta().loss_history;
  REQUIRE(h.size() > 10);
  for (std::size_t k = 1; k < h.size(); ++k) CHECK(h[k] <= h[k - 1]);
}

TEST_CASE("batch prediction equals row-wise prediction") {
  const auto ds = random_dataset(7, 25, 6);
  const auto m = train_logistic(ds);
  const auto batch = predict_all(m, ds.X, ds.a);
  const auto forced = predict_all(m, ds.X, std::uint8_t{1});
  for (std::size_t i = 0; i < ds.n(); ++i) {
    CHECK(batch[i] == m.predict_proba(ds.X.row(i), ds.a[i]));
    CHECK(forced[i] == m.predict_proba(ds.X.row(i), 1));
  }
}

TEST_CASE("shape and input errors") {
  const LogisticModel m({0.1, 0.2, 0.3}, 0.0);
  const std::vector<double> wrong{1.0, 2.0, 3.0};
  CHECK_THROWS_AS((void)m.predict_proba(wrong, 0), ShapeError);
  const std::vector<double> ok{1.0, 2.0};
  CHECK_THROWS_AS((void)m.predict_proba(ok, 2), ShapeError);
  const auto ds = random_dataset(8, 10, 2);
  CHECK_THROWS_AS(logistic_loss(ds, std::vector<double>{1.0}, 0.0, 0.0), ShapeError);
  Dataset empty;
  CHECK_THROWS_AS(train_logistic(empty), EmptyDatasetError);
}

TEST_CASE("save and load preserve predictions") {
  const auto ds = random_dataset(9, 60, 4);
  const auto m = train_logistic(ds);
  const auto env = save_model(m, ds.feature_names, "abc");
  const auto text = env.dump();
  const auto back = load_model(Json::parse(text));
  REQUIRE(back->kind() == "logistic");
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::uint8_t a = 0; a < 2; ++a) CHECK(back->predict_proba(ds.X.row(i), a) == m.predict_proba(ds.X.row(i), a));
  }
  CHECK(model_id(*back) == model_id(m));

  auto bad = env;
  bad["version"] = 99;
  CHECK_THROWS_AS(load_model(bad), ParseError);
  bad = env;
  bad["kind"] = "svm";
  CHECK_THROWS_AS(load_model(bad), ParseError);
}
