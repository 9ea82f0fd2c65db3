#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cafp/matrix.hpp"

namespace cafp {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of the first header cell equal to `name`, if any.
  [[nodiscard]] std::optional<std::size_t> column(std::string_view name) const;
};

// RFC-4180: comma separated, optional double-quoted fields with "" escapes,
// LF or CRLF line ends, mandatory header row. A UTF-8 BOM is skipped.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Schema

enum class FeatureKind { kNumeric, kCategorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::kNumeric;
};

// Predicate on the raw string value of one column. Rows failing any filter
// are dropped before encoding.
struct RowFilter {
  enum class Op { kIn, kNotIn, kBetween };
  std::string column;
  Op op = Op::kIn;
  std::vector<std::string> values;  // kIn / kNotIn
  double lo = 0.0;                  // kBetween, inclusive
  double hi = 0.0;

  [[nodiscard]] bool keep(std::string_view raw) const;
};

// JSON keys:
//   name, target_column, positive_label (string or list), protected_column,
//   privileged_value (string) | privileged_threshold {"min": number},
//   features [{name, kind: numeric|categorical}], row_filter [{column, in|not_in|between}],
//   missing_values [strings], missing_policy ("drop_row")
struct SchemaConfig {
  std::string name = "dataset";
  std::string target_column;
  std::vector<std::string> positive_labels;
  std::string protected_column;
  std::optional<std::string> privileged_value;
  std::optional<double> privileged_min;
  std::vector<FeatureSpec> features;
  std::vector<RowFilter> row_filter;
  std::vector<std::string> missing_values{"", "?", "NA"};

  static SchemaConfig from_json(const Json& doc);
  [[nodiscard]] Json to_json() const;
  void validate() const;
  // FNV-1a of the canonical JSON form, hex encoded.
  [[nodiscard]] std::string hash() const;

  // Schema rules applied to raw cell strings.
  [[nodiscard]] bool is_missing(std::string_view raw) const;
  [[nodiscard]] std::uint8_t encode_group(std::string_view raw) const;
  [[nodiscard]] std::uint8_t encode_label(std::string_view raw) const;
};

SchemaConfig load_schema(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dataset

struct Dataset {
  Matrix X;                          // n x d encoded features (protected attribute excluded)
  std::vector<std::uint8_t> a;       // protected attribute, 1 = privileged
  std::vector<std::uint8_t> y;       // label, 1 = positive
  std::vector<std::string> feature_names;
  std::vector<bool> numeric;         // per column: true for numeric, false for one-hot
  std::vector<std::size_t> source_row;  // 0-based data row in the source CSV
  std::string id = "dataset";
  std::string schema_hash;

  [[nodiscard]] std::size_t n() const noexcept { return X.rows(); }
  [[nodiscard]] std::size_t d() const noexcept { return X.cols(); }

  // Throws DataError unless both groups and both labels are present and X is finite.
  void validate() const;

  [[nodiscard]] Dataset subset(std::span<const std::size_t> rows) const;
};

// Encodes a parsed table. Categorical columns are one-hot encoded over their
// sorted distinct values with the first category dropped; numeric columns are
// passed through raw.
Dataset encode_table(const CsvTable& table, const SchemaConfig& schema);
Dataset load_csv(const std::filesystem::path& path, const SchemaConfig& schema);

// ---------------------------------------------------------------------------
// Splits

struct SplitPlan {
  std::uint64_t seed = 0;
  double train_fraction = 0.7;
  std::uint64_t repeat_index = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
  bool label_only_fallback = false;
};

struct Split {
  Dataset train;
  Dataset test;
  SplitIndices indices;
};

// Stratified on (a, y). Each cell with at least two members is represented
// on both sides; the train total is round(n * train_fraction). If any cell
// has fewer than two members the split stratifies on y alone and sets
// label_only_fallback.
SplitIndices split_indices(std::span<const std::uint8_t> a, std::span<const std::uint8_t> y,
                           const SplitPlan& plan);
Split split(const Dataset& ds, const SplitPlan& plan);

// ---------------------------------------------------------------------------
// Standardization

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;   // population standard deviation; 0 for constant columns
  std::vector<bool> active;    // numeric columns only
};

Standardizer fit_standardizer(const Dataset& train);
Dataset apply_standardizer(const Standardizer& std, const Dataset& ds);

}  // namespace cafp
