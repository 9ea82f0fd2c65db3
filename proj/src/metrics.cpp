#include "cafp/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cafp/errors.hpp"

namespace cafp {

namespace {

void check_lengths(std::size_t n, std::size_t m) {
  if (n != m) throw ShapeError("metric inputs have different lengths (" + std::to_string(n) + " vs " + std::to_string(m) + ")");
}

double ratio(std::size_t num, std::size_t den) { return static_cast<double>(num) / static_cast<double>(den); }

void warn(std::vector<std::string>* sink, std::string message) {
  if (sink) sink->push_back(std::move(message));
}

}  // namespace

std::vector<std::uint8_t> threshold_scores(std::span<const double> scores, double threshold) {
  std::vector<std::uint8_t> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= threshold ? 1 : 0;
  return out;
}

ConfusionRates confusion_rates(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> y,
                               std::span<const std::uint8_t> a) {
  check_lengths(pred.size(), y.size());
  check_lengths(pred.size(), a.size());
  std::size_t n[2] = {0, 0}, pos[2] = {0, 0}, neg[2] = {0, 0}, pred_pos[2] = {0, 0}, tp[2] = {0, 0}, fp[2] = {0, 0};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int g = a[i] ? 1 : 0;
    ++n[g];
    if (pred[i]) ++pred_pos[g];
    if (y[i]) {
      ++pos[g];
      if (pred[i]) ++tp[g];
    } else {
      ++neg[g];
      if (pred[i]) ++fp[g];
    }
  }
  ConfusionRates out;
  for (int g = 0; g < 2; ++g) {
    if (n[g] == 0) throw DataError("protected group a=" + std::to_string(g) + " is absent");
    auto& r = out.group[g];
    r.n = n[g];
    r.positives = pos[g];
    r.negatives = neg[g];
    r.positive_rate = ratio(pred_pos[g], n[g]);
    if (pos[g] > 0) {
      r.tpr = ratio(tp[g], pos[g]);
    } else {
      out.warnings.push_back("TPR undefined for group a=" + std::to_string(g) + " (no positive labels)");
    }
    if (neg[g] > 0) {
      r.fpr = ratio(fp[g], neg[g]);
    } else {
      out.warnings.push_back("FPR undefined for group a=" + std::to_string(g) + " (no negative labels)");
    }
  }
  return out;
}

SignedAbs dpd(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> a) {
  check_lengths(pred.size(), a.size());
  std::size_t n[2] = {0, 0}, p[2] = {0, 0};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int g = a[i] ? 1 : 0;
    ++n[g];
    p[g] += pred[i] ? 1 : 0;
  }
  for (int g = 0; g < 2; ++g) {
    if (n[g] == 0) throw DataError("protected group a=" + std::to_string(g) + " is absent");
  }
  const double s = ratio(p[0], n[0]) - ratio(p[1], n[1]);
  return {s, std::abs(s)};
}

SignedAbs aod(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> y, std::span<const std::uint8_t> a,
              std::vector<std::string>* warnings) {
  const auto rates = confusion_rates(pred, y, a);
  for (const auto& w : rates.warnings) warn(warnings, w);
  const auto& g0 = rates.group[0];
  const auto& g1 = rates.group[1];
  double sum_signed = 0.0;
  double sum_abs = 0.0;
  int terms = 0;
  if (g0.tpr && g1.tpr) {
    const double gap = *g0.tpr - *g1.tpr;
    sum_signed += gap;
    sum_abs += std::abs(gap);
    ++terms;
  } else {
    warn(warnings, "TPR gap excluded from AOD");
  }
  if (g0.fpr && g1.fpr) {
    const double gap = *g0.fpr - *g1.fpr;
    sum_signed += gap;
    sum_abs += std::abs(gap);
    ++terms;
  } else {
    warn(warnings, "FPR gap excluded from AOD");
  }
  if (terms == 0) throw DataError("AOD undefined: neither TPR nor FPR gap is defined");
  return {sum_signed / terms, sum_abs / terms};
}

double eod(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> y, std::span<const std::uint8_t> a,
           std::vector<std::string>* warnings) {
  const auto rates = confusion_rates(pred, y, a);
  for (const auto& w : rates.warnings) warn(warnings, w);
  const auto& g0 = rates.group[0];
  const auto& g1 = rates.group[1];
  std::optional<double> best;
  if (g0.fpr && g1.fpr) best = std::abs(*g0.fpr - *g1.fpr);
  if (g0.tpr && g1.tpr) best = std::max(best.value_or(0.0), std::abs(*g0.tpr - *g1.tpr));
  if (!best) throw DataError("EOD undefined: no label value is present in both groups");
  return *best;
}

double score_eod(std::span<const double> scores, std::span<const std::uint8_t> y, std::span<const std::uint8_t> a,
                 std::vector<std::string>* warnings) {
  check_lengths(scores.size(), y.size());
  check_lengths(scores.size(), a.size());
  double sum[2][2] = {{0.0, 0.0}, {0.0, 0.0}};  // [label][group]
  std::size_t cnt[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int l = y[i] ? 1 : 0;
    const int g = a[i] ? 1 : 0;
    sum[l][g] += scores[i];
    ++cnt[l][g];
  }
  std::optional<double> best;
  for (int l = 0; l < 2; ++l) {
    if (cnt[l][0] == 0 || cnt[l][1] == 0) {
      warn(warnings, "score EOD: label " + std::to_string(l) + " missing from a group, excluded");
      continue;
    }
    const double gap = std::abs(sum[l][0] / static_cast<double>(cnt[l][0]) - sum[l][1] / static_cast<double>(cnt[l][1]));
    best = std::max(best.value_or(0.0), gap);
  }
  if (!best) throw DataError("score EOD undefined: no label value is present in both groups");
  return *best;
}

SignedAbs score_dpd(std::span<const double> scores, std::span<const std::uint8_t> a) {
  check_lengths(scores.size(), a.size());
  double sum[2] = {0.0, 0.0};
  std::size_t n[2] = {0, 0};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int g = a[i] ? 1 : 0;
    sum[g] += scores[i];
    ++n[g];
  }
  for (int g = 0; g < 2; ++g) {
    if (n[g] == 0) throw DataError("protected group a=" + std::to_string(g) + " is absent");
  }
  const double s = sum[0] / static_cast<double>(n[0]) - sum[1] / static_cast<double>(n[1]);
  return {s, std::abs(s)};
}

double accuracy(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> y) {
  check_lengths(pred.size(), y.size());
  if (pred.empty()) throw EmptyDatasetError("accuracy of an empty prediction set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += (pred[i] != 0) == (y[i] != 0) ? 1 : 0;
  return ratio(hits, pred.size());
}

double balanced_accuracy(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> y) {
  check_lengths(pred.size(), y.size());
  std::size_t pos = 0, neg = 0, tp = 0, tn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (y[i]) {
      ++pos;
      tp += pred[i] ? 1 : 0;
    } else {
      ++neg;
      tn += pred[i] ? 0 : 1;
    }
  }
  if (pos == 0 && neg == 0) throw EmptyDatasetError("balanced accuracy of an empty prediction set");
  if (pos == 0) return ratio(tn, neg);
  if (neg == 0) return ratio(tp, pos);
  return 0.5 * (ratio(tp, pos) + ratio(tn, neg));
}

Json MetricSet::to_json() const {
  return Json{{"accuracy", accuracy}, {"balanced_accuracy", balanced_accuracy},
              {"dpd_signed", dpd_signed}, {"dpd_abs", dpd_abs},
              {"aod_signed", aod_signed}, {"aod_abs", aod_abs},
              {"eod", eod}, {"threshold", threshold}};
}

MetricSet compute_metrics(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> y,
                          std::span<const std::uint8_t> a, double threshold) {
  MetricSet m;
  m.threshold = threshold;
  m.accuracy = accuracy(pred, y);
  m.balanced_accuracy = balanced_accuracy(pred, y);
  const auto d = dpd(pred, a);
  m.dpd_signed = d.signed_value;
  m.dpd_abs = d.abs_value;
  const auto o = aod(pred, y, a, &m.warnings);
  m.aod_signed = o.signed_value;
  m.aod_abs = o.abs_value;
  m.eod = eod(pred, y, a, nullptr);
  return m;
}

MetricSet compute_metrics_from_scores(std::span<const double> scores, std::span<const std::uint8_t> y,
                                      std::span<const std::uint8_t> a, double threshold) {
  const auto pred = threshold_scores(scores, threshold);
  return compute_metrics(pred, y, a, threshold);
}

MIEstimate mutual_info(std::span<const double> scores, std::span<const std::uint8_t> a, std::size_t bins) {
  check_lengths(scores.size(), a.size());
  if (bins == 0) throw ConfigError("mutual information needs at least one bin");
  if (scores.size() < bins) {
    throw ConfigError("mutual information needs n >= bins (n=" + std::to_string(scores.size()) +
                      ", bins=" + std::to_string(bins) + ")");
  }
  std::vector<std::size_t> joint(2 * bins, 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = std::clamp(scores[i], 0.0, 1.0);
    const auto b = std::min(static_cast<std::size_t>(std::floor(s * static_cast<double>(bins))), bins - 1);
    ++joint[(a[i] ? 1 : 0) * bins + b];
  }
  const double n = static_cast<double>(scores.size());
  double pa[2] = {0.0, 0.0};
  std::vector<double> pz(bins, 0.0);
  for (int g = 0; g < 2; ++g) {
    for (std::size_t b = 0; b < bins; ++b) {
      const double c = static_cast<double>(joint[g * bins + b]);
      pa[g] += c;
      pz[b] += c;
    }
  }
  double mi = 0.0;
  for (int g = 0; g < 2; ++g) {
    for (std::size_t b = 0; b < bins; ++b) {
      const double c = static_cast<double>(joint[g * bins + b]);
      if (c == 0.0) continue;
      // c/n * log( (c/n) / ((pa/n)(pz/n)) ) = c/n * log(c*n / (pa*pz))
      mi += (c / n) * std::log(c * n / (pa[g] * pz[b]));
    }
  }
  return {std::max(mi, 0.0), bins, scores.size()};
}

}  // namespace cafp
