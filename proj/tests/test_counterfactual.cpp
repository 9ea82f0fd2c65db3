#include <doctest.h>

#include <cmath>

#include "cafp/counterfactual.hpp"
#include "cafp/errors.hpp"
#include "cafp/logistic.hpp"
#include "cafp/random.hpp"
#include "test_util.hpp"

using namespace cafp;
using cafp::testing::ConstantModel;
using cafp::testing::make_dataset;
using cafp::testing::TableModel;

TEST_CASE("triple for a single instance") {
  const auto t = make_triple(0.4, 0.8, std::uint8_t{1});
  CHECK(t.p_factual == 0.8);
  CHECK(t.p_counterfactual == 0.4);
  CHECK(t.p_avg == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(t.cb == doctest::Approx(0.4).epsilon(1e-15));

  const auto flipped = make_triple(0.4, 0.8, std::uint8_t{0});
  CHECK(flipped.p_factual == 0.4);
  CHECK(flipped.cb == doctest::Approx(-0.4).epsilon(1e-15));
  CHECK(flipped.p_avg == t.p_avg);

  const auto unobserved = make_triple(0.4, 0.8, std::nullopt);
  CHECK(unobserved.p_factual == 0.4);
  CHECK(unobserved.p_avg == t.p_avg);
}

TEST_CASE("an attribute-blind model is left unchanged") {
  const auto t = make_triple(0.37, 0.37, std::uint8_t{1});
  CHECK(t.cb == 0.0);
  CHECK(t.p_avg == 0.37);
  CHECK(std::abs(t.p_factual - t.p_avg) == 0.0);
}

TEST_CASE("distortion equals half the counterfactual bias") {
  Rng rng(1);
  std::vector<ScoreTriple> triples;
  for (int i = 0; i < 10000; ++i) {
    triples.push_back(make_triple(rng.uniform(), rng.uniform(), static_cast<std::uint8_t>(rng.below(2))));
  }
  for (const auto& t : triples) {
    CHECK(std::abs(std::abs(t.p_factual - t.p_avg) - std::abs(t.cb) / 2.0) < 1e-12);
    CHECK(t.p_avg >= std::min(t.p_factual, t.p_counterfactual));
    CHECK(t.p_avg <= std::max(t.p_factual, t.p_counterfactual));
  }
  CHECK(max_identity_error(triples) < 1e-12);
}

TEST_CASE("averaged score does not depend on the observed attribute") {
  const auto ds = make_dataset({{0.3, -1.0}, {1.2, 0.5}, {-0.7, 2.0}}, {0, 1, 1}, {0, 1, 0});
  const LogisticModel m({0.5, -0.3, 1.1}, 0.2);
  auto flipped = ds;
  for (auto& v : flipped.a) v = static_cast<std::uint8_t>(1 - v);
  const auto t1 = cafp_batch(m, ds);
  const auto t2 = cafp_batch(m, flipped);
  const auto plain = cafp_scores(m, ds.X);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    CHECK(t1[i].p_avg == t2[i].p_avg);
    CHECK(t1[i].p_avg == plain[i]);
    CHECK(t1[i].cb == -t2[i].cb);
    const double f0 = m.predict_proba(ds.X.row(i), 0);
    const double f1 = m.predict_proba(ds.X.row(i), 1);
    CHECK(t1[i].p_avg == doctest::Approx(0.5 * (f0 + f1)).epsilon(1e-15));
  }
}

TEST_CASE("certificate on a hand-built example") {
  // label 0 rows have |cb| 0.2 and 0.4, label 1 rows have 0.1 and 0.3
  const TableModel model({0.5, 0.5, 0.5, 0.5}, {0.7, 0.1, 0.6, 0.8});
  const auto ds = make_dataset({{0}, {1}, {2}, {3}}, {1, 0, 1, 0}, {0, 0, 1, 1});
  const auto cert = eo_bound_certificate(model, ds);
  CHECK(cert.b0 == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(cert.b1 == doctest::Approx(0.10).epsilon(1e-12));
  CHECK(cert.bound == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(cert.n0 == 2);
  CHECK(cert.n1 == 2);
  const auto j = cert.to_json();
  CHECK(j.at("bound").get<double>() == cert.bound);
}

TEST_CASE("certificate needs both labels") {
  const std::vector<ScoreTriple> triples{make_triple(0.1, 0.2, std::uint8_t{0}), make_triple(0.3, 0.3, std::uint8_t{1})};
  const std::vector<std::uint8_t> y{1, 1};
  CHECK_THROWS_AS(eo_bound_certificate(triples, y), CertificateError);
}

TEST_CASE("mean distortion") {
  const std::vector<ScoreTriple> triples{make_triple(0.1, 0.5, std::uint8_t{0}), make_triple(0.6, 0.4, std::uint8_t{1})};
  CHECK(mean_distortion(triples) == doctest::Approx(0.15).epsilon(1e-12));
  CHECK_THROWS_AS(mean_distortion(std::vector<ScoreTriple>{}), EmptyDatasetError);
}

TEST_CASE("constant-attribute model gives a constant averaged score") {
  const ConstantModel m(2, 0.2, 0.6);
  Matrix X(3, 2);
  for (double p : cafp_scores(m, X)) CHECK(p == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("batch errors name the row") {
  const TableModel model({0.5, 0.5}, {0.5, 0.5});
  const auto ds = make_dataset({{0}, {1}, {5}}, {0, 1, 0}, {0, 1, 1});
  try {
    (void)cafp_batch(model, ds);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}
