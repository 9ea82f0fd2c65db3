#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cafp/baselines.hpp"
#include "cafp/counterfactual.hpp"
#include "cafp/data.hpp"
#include "cafp/ensemble.hpp"
#include "cafp/logistic.hpp"
#include "cafp/metrics.hpp"
#include "cafp/model.hpp"

namespace cafp {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  std::filesystem::path dataset_path;
  std::filesystem::path schema_path;
  std::string model = "lr";                          // lr | rf | gbt
  std::vector<std::string> postprocs{"none", "cafp"};  // none | cafp | eqodds | reject
  int repeats = 100;
  std::uint64_t seed = 0;
  double train_fraction = 0.7;
  double validation_fraction = 0.2;  // carved out of each training split for baseline fitting
  double threshold = 0.5;
  bool select_reject_theta = true;   // otherwise reject_theta is used as is
  double reject_theta = 0.1;
  std::size_t mi_bins = 20;

  LogisticConfig logistic;
  ForestConfig forest;
  GbtConfig gbt;

  void validate() const;
  [[nodiscard]] Json to_json() const;
};

const std::vector<std::string>& known_models();
const std::vector<std::string>& known_postprocs();

// Trains the configured model family. `seed` overrides the family's seed.
std::unique_ptr<ProbClassifier> train_model(const std::string& kind, const Dataset& train,
                                            const ExperimentConfig& cfg, std::uint64_t seed);

Dataset load_dataset(const std::filesystem::path& csv, const std::filesystem::path& schema);

// ---------------------------------------------------------------------------
// One repeat: split, carve validation, standardize, train

struct PreparedRun {
  Dataset fit;         // model training rows (standardized)
  Dataset validation;  // baseline fitting rows (standardized)
  Dataset test;        // evaluation rows (standardized)
  Standardizer standardizer;  // fitted on `fit`
  bool label_only_fallback = false;
  std::unique_ptr<ProbClassifier> model;
};

PreparedRun prepare_run(const Dataset& ds, const ExperimentConfig& cfg, int repeat_index);

// ---------------------------------------------------------------------------
// Aggregation

struct Summary {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1)
  std::size_t n = 0;

  [[nodiscard]] Json to_json() const;
};

// Mean, sample SD and CI = mean +- 1.96 * SD / sqrt(n). Values are sorted
// before reduction so the result does not depend on input order.
Summary summarize(std::span<const double> values);

// ---------------------------------------------------------------------------
// Experiment report

struct RunRecord {
  int repeat = 0;
  bool ok = false;
  std::string error;
  std::size_t n_fit = 0;
  std::size_t n_validation = 0;
  std::size_t n_test = 0;
  bool label_only_fallback = false;
  std::map<std::string, std::map<std::string, double>> metrics;  // postproc -> metric -> value
  std::optional<EOBoundCertificate> certificate;
  double identity_error = 0.0;  // max distortion-identity error on the test batch
  Json baselines = Json::object();
};

struct ReportRow {
  std::string model;
  std::string postproc;
  std::map<std::string, Summary> metrics;
};

struct FairnessReport {
  ExperimentConfig config;
  std::string dataset_id;
  std::vector<ReportRow> rows;
  std::vector<RunRecord> runs;
  std::size_t succeeded = 0;

  [[nodiscard]] const ReportRow* row(const std::string& postproc) const;
  [[nodiscard]] Json to_json(bool reproducible) const;
  // Long-format bar-chart data: model,postproc,metric,mean,ci_low,ci_high,sd
  [[nodiscard]] std::string to_csv() const;
};

// Repeated-split evaluation. Runs that throw are recorded as failed; the
// report aggregates the successful ones if at least 80% succeeded and throws
// otherwise.
FairnessReport run_experiment(const Dataset& ds, const ExperimentConfig& cfg);
FairnessReport run_experiment(const ExperimentConfig& cfg);

// Lower-level hook: evaluate the configured post-processors on one prepared
// run. Exposed so alternative drivers can reuse the per-run logic.
RunRecord evaluate_run(PreparedRun& run, const ExperimentConfig& cfg, int repeat_index);

// ---------------------------------------------------------------------------
// Threshold sweep

struct SweepCurve {
  std::vector<double> balanced_accuracy;
  std::vector<double> dpd_signed;
};

struct SweepResult {
  std::vector<double> thresholds;
  SweepCurve base;
  SweepCurve cafp;
  SweepCurve eqodds;  // threshold-independent decisions, repeated per threshold
  int repeats = 0;
  std::string note;

  [[nodiscard]] Json to_json() const;
  // Columns: threshold,base_balanced_accuracy,base_dpd,cafp_balanced_accuracy,cafp_dpd,
  //          eqodds_balanced_accuracy,eqodds_dpd
  [[nodiscard]] std::string to_csv() const;
};

// 25 thresholds 0.01 + i * 0.98 / 24.
std::vector<double> sweep_thresholds();

// Curves are averaged over cfg.repeats repeated splits.
SweepResult threshold_sweep(const Dataset& ds, const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Ablation

struct AblationRow {
  std::string name;  // factual | counterfactual | averaged
  double accuracy = 0.0;
  double dpd_signed = 0.0;
  double aod_signed = 0.0;
  double dpd_abs = 0.0;
  double aod_abs = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  int repeats = 0;
  // Largest |p_avg - (p_factual + p_counterfactual) / 2| seen across repeats.
  double max_average_error = 0.0;

  [[nodiscard]] const AblationRow& row(const std::string& name) const;
  [[nodiscard]] Json to_json() const;
  [[nodiscard]] std::string to_csv() const;
};

// Thresholds the factual, counterfactual and averaged scores at cfg.threshold
// and averages the metrics over cfg.repeats repeated splits.
AblationResult ablation(const Dataset& ds, const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Latency

struct LatencyResult {
  double base_ms_per_100 = 0.0;
  double cafp_ms_per_100 = 0.0;
  double ratio = 0.0;
  std::size_t batch = 0;
  int trials = 0;
  int inner_loops = 0;

  [[nodiscard]] Json to_json() const;
};

// Median wall-clock time of factual scoring vs CAFP scoring on the first
// `batch` rows (cycled if the dataset is smaller), after 3 warm-up trials.
LatencyResult latency_probe(const ProbClassifier& model, const Matrix& X, std::span<const std::uint8_t> a,
                            std::size_t batch, int trials = 20);

// ---------------------------------------------------------------------------
// Synthetic theorem checks

struct SyntheticConfig {
  std::uint64_t seed = 0;
  std::size_t n = 10000;
  double a_coefficient = 1.5;
  // Shift added to feature 0 for a=1 rows. Non-zero breaks the X independent
  // of A premise; parity and leakage checks are then reported, not failed.
  double feature_shift = 0.0;
  std::vector<double> feature_weights{0.8, -0.5, 0.3, 0.0, 0.2};
  double dpd_limit = 0.01;
  double mi_limit = 0.005;
  std::size_t mi_bins = 20;
};

struct LedgerEntry {
  std::string check;
  std::string status;  // pass | fail | premise_violated
  double measured = 0.0;
  double required = 0.0;
  std::string detail;
};

struct SyntheticLedger {
  std::vector<LedgerEntry> entries;
  bool premise_holds = true;
  EOBoundCertificate certificate;
  double protected_coefficient = 0.0;

  [[nodiscard]] bool all_passed() const;  // premise_violated entries count as not failed
  [[nodiscard]] const LedgerEntry& entry(const std::string& check) const;
  [[nodiscard]] Json to_json() const;
};

// Draws training and evaluation samples of size n from the generator, fits
// logistic regression and runs the four checks on the evaluation sample.
SyntheticLedger synthetic_theorem_suite(const SyntheticConfig& cfg);

// The synthetic generator; exposed for tests.
Dataset make_synthetic(const SyntheticConfig& cfg, std::uint64_t stream);

}  // namespace cafp
