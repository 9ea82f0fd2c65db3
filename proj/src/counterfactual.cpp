#include "cafp/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cafp/errors.hpp"

namespace cafp {

ScoreTriple make_triple(double f0, double f1, std::optional<std::uint8_t> a_observed) noexcept {
  ScoreTriple t;
  t.p_avg = 0.5 * (f0 + f1);
  if (a_observed.value_or(0) == 1) {
    t.p_factual = f1;
    t.p_counterfactual = f0;
  } else {
    t.p_factual = f0;
    t.p_counterfactual = f1;
  }
  t.cb = t.p_factual - t.p_counterfactual;
  return t;
}

ScoreTriple cafp_score(const ProbClassifier& model, std::span<const double> x, std::optional<std::uint8_t> a_observed) {
  if (a_observed && *a_observed > 1) throw ShapeError("protected attribute must be 0 or 1");
  return make_triple(model.predict_proba(x, 0), model.predict_proba(x, 1), a_observed);
}

std::vector<ScoreTriple> cafp_batch(const ProbClassifier& model, const Matrix& X,
                                    std::span<const std::uint8_t> a_observed) {
  if (!a_observed.empty() && a_observed.size() != X.rows()) {
    throw ShapeError("protected attribute length does not match row count");
  }
  std::vector<ScoreTriple> out(X.rows());
  if (X.rows() == 0) return out;
  std::vector<double> f0;
  std::vector<double> f1;
  try {
    f0 = predict_all(model, X, std::uint8_t{0});
    f1 = predict_all(model, X, std::uint8_t{1});
  } catch (const std::exception&) {
    // Re-query row by row so the failure names the offending instance.
    for (std::size_t i = 0; i < X.rows(); ++i) {
      try {
        (void)model.predict_proba(X.row(i), 0);
        (void)model.predict_proba(X.row(i), 1);
      } catch (const std::exception& e) {
        throw Error("model query failed at row " + std::to_string(i) + ": " + e.what());
      }
    }
    throw;
  }
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto a = a_observed.empty() ? std::nullopt : std::optional<std::uint8_t>(a_observed[i]);
    out[i] = make_triple(f0[i], f1[i], a);
  }
  return out;
}

std::vector<ScoreTriple> cafp_batch(const ProbClassifier& model, const Dataset& ds) {
  return cafp_batch(model, ds.X, ds.a);
}

std::vector<double> cafp_scores(const ProbClassifier& model, const Matrix& X) {
  auto f0 = predict_all(model, X, std::uint8_t{0});
  const auto f1 = predict_all(model, X, std::uint8_t{1});
  for (std::size_t i = 0; i < f0.size(); ++i) f0[i] = 0.5 * (f0[i] + f1[i]);
  return f0;
}

Json EOBoundCertificate::to_json() const {
  return Json{{"b0", b0}, {"b1", b1}, {"bound", bound}, {"n0", n0}, {"n1", n1}};
}

EOBoundCertificate eo_bound_certificate(std::span<const ScoreTriple> triples, std::span<const std::uint8_t> y) {
  if (triples.size() != y.size()) throw ShapeError("label length does not match score count");
  double sum[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > 1) throw ShapeError("labels must be 0 or 1");
    sum[y[i]] += std::abs(triples[i].cb);
    ++count[y[i]];
  }
  for (int label = 0; label < 2; ++label) {
    if (count[label] == 0) throw CertificateError("no rows with label " + std::to_string(label));
  }
  EOBoundCertificate c;
  c.n0 = count[0];
  c.n1 = count[1];
  c.b0 = 0.5 * (sum[0] / static_cast<double>(count[0]));
  c.b1 = 0.5 * (sum[1] / static_cast<double>(count[1]));
  c.bound = std::max(c.b0, c.b1);
  return c;
}

EOBoundCertificate eo_bound_certificate(const ProbClassifier& model, const Dataset& ds) {
  const auto triples = cafp_batch(model, ds);
  return eo_bound_certificate(triples, ds.y);
}

double mean_distortion(std::span<const ScoreTriple> triples) {
  if (triples.empty()) throw EmptyDatasetError("distortion of an empty batch");
  double s = 0.0;
  for (const auto& t : triples) s += std::abs(t.p_factual - t.p_avg);
  return s / static_cast<double>(triples.size());
}

double max_identity_error(std::span<const ScoreTriple> triples) noexcept {
  double worst = 0.0;
  for (const auto& t : triples) {
    worst = std::max(worst, std::abs(std::abs(t.p_factual - t.p_avg) - 0.5 * std::abs(t.cb)));
  }
  return worst;
}

}  // namespace cafp
