#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace cafp {

using Json = nlohmann::json;

// Decisions are 1 when score >= threshold.
std::vector<std::uint8_t> threshold_scores(std::span<const double> scores, double threshold);

// Rates for one protected group. A rate whose denominator is empty is
// undefined (nullopt) and is left out of the metrics that depend on it.
struct GroupRates {
  std::size_t n = 0;
  std::size_t positives = 0;  // rows with y = 1
  std::size_t negatives = 0;
  double positive_rate = 0.0;  // P(pred = 1)
  std::optional<double> tpr;
  std::optional<double> fpr;
};

struct ConfusionRates {
  GroupRates group[2];
  std::vector<std::string> warnings;
};

// Throws DataError if either protected group is absent.
ConfusionRates confusion_rates(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> y,
                               std::span<const std::uint8_t> a);

struct SignedAbs {
  double signed_value = 0.0;
  double abs_value = 0.0;
};

// P(pred=1 | a=0) - P(pred=1 | a=1).
SignedAbs dpd(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> a);

// signed = mean of (TPR_0 - TPR_1) and (FPR_0 - FPR_1); abs = mean of their
// magnitudes. Undefined gaps are dropped from the mean; with none defined a
// DataError is thrown.
SignedAbs aod(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> y, std::span<const std::uint8_t> a,
              std::vector<std::string>* warnings = nullptr);

// max over y of |P(pred=1 | a=0, y) - P(pred=1 | a=1, y)|.
double eod(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> y, std::span<const std::uint8_t> a,
           std::vector<std::string>* warnings = nullptr);

// Same as eod on group-conditional mean scores.
double score_eod(std::span<const double> scores, std::span<const std::uint8_t> y, std::span<const std::uint8_t> a,
                 std::vector<std::string>* warnings = nullptr);

// |E[s | a=0] - E[s | a=1]| with its sign.
SignedAbs score_dpd(std::span<const double> scores, std::span<const std::uint8_t> a);

double accuracy(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> y);
// Mean of the overall true positive and true negative rates.
double balanced_accuracy(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> y);

struct MetricSet {
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double dpd_signed = 0.0;
  double dpd_abs = 0.0;
  double aod_signed = 0.0;
  double aod_abs = 0.0;
  double eod = 0.0;
  double threshold = 0.5;
  std::vector<std::string> warnings;

  [[nodiscard]] Json to_json() const;
};

MetricSet compute_metrics(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> y,
                          std::span<const std::uint8_t> a, double threshold = 0.5);
MetricSet compute_metrics_from_scores(std::span<const double> scores, std::span<const std::uint8_t> y,
                                      std::span<const std::uint8_t> a, double threshold = 0.5);

struct MIEstimate {
  double nats = 0.0;
  std::size_t bins = 0;
  std::size_t n = 0;
};

// Plug-in mutual information between binned scores and a binary attribute.
// Scores fall into equal-width bins over [0,1]; bin = min(floor(s * bins), bins - 1).
MIEstimate mutual_info(std::span<const double> scores, std::span<const std::uint8_t> a, std::size_t bins = 20);

}  // namespace cafp
