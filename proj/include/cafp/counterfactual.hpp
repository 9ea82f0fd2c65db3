#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "cafp/data.hpp"
#include "cafp/model.hpp"

namespace cafp {

// Scores for one instance. p_avg is the CAFP output; cb is the counterfactual
// bias f(x, a) - f(x, 1 - a).
struct ScoreTriple {
  double p_factual = 0.0;
  double p_counterfactual = 0.0;
  double p_avg = 0.0;
  double cb = 0.0;
};

// Builds a triple from the two model queries f(x,0) and f(x,1). Without an
// observed group, factual/counterfactual map to a=0 / a=1.
ScoreTriple make_triple(double f0, double f1, std::optional<std::uint8_t> a_observed) noexcept;

// Queries the model at a=0 and a=1. The observed attribute only affects the
// orientation of p_factual, p_counterfactual and cb; p_avg never depends on it.
ScoreTriple cafp_score(const ProbClassifier& model, std::span<const double> x,
                       std::optional<std::uint8_t> a_observed = std::nullopt);

// Row-wise cafp_score in row order. Errors are rethrown with the row index.
std::vector<ScoreTriple> cafp_batch(const ProbClassifier& model, const Dataset& ds);
std::vector<ScoreTriple> cafp_batch(const ProbClassifier& model, const Matrix& X,
                                    std::span<const std::uint8_t> a_observed);

// Averaged scores only.
std::vector<double> cafp_scores(const ProbClassifier& model, const Matrix& X);

struct EOBoundCertificate {
  double b0 = 0.0;
  double b1 = 0.0;
  double bound = 0.0;
  std::size_t n0 = 0;
  std::size_t n1 = 0;

  [[nodiscard]] Json to_json() const;
};

// B_y = 0.5 * mean |cb| over rows with label y; bound = max(B_0, B_1).
// Throws CertificateError when a label value has no rows.
EOBoundCertificate eo_bound_certificate(std::span<const ScoreTriple> triples, std::span<const std::uint8_t> y);
EOBoundCertificate eo_bound_certificate(const ProbClassifier& model, const Dataset& ds);

// Mean |p_factual - p_avg|. Throws EmptyDatasetError on an empty list.
double mean_distortion(std::span<const ScoreTriple> triples);

// Largest | |p_factual - p_avg| - |cb|/2 | over the list (0 for an empty list).
double max_identity_error(std::span<const ScoreTriple> triples) noexcept;

}  // namespace cafp
