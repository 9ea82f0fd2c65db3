#include "cafp/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "cafp/errors.hpp"
#include "cafp/random.hpp"

namespace cafp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view raw) {
  raw = trim(raw);
  if (raw.empty()) return std::nullopt;
  if (raw.front() == '+') raw.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
  if (ec != std::errc{} || ptr != raw.data() + raw.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

std::string cell_location(std::size_t data_row, std::string_view column) {
  std::ostringstream os;
  os << "row " << data_row + 1 << " (line " << data_row + 2 << "), column '" << column << "'";
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

CsvTable parse_csv(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started) {
          throw ParseError("stray quote inside unquoted field at line " + std::to_string(line));
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        end_record();
        ++line;
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field starting before line " + std::to_string(line));
  if (field_started || !record.empty()) end_record();

  if (records.empty()) throw ParseError("CSV has no header row");
  CsvTable table;
  table.header = std::move(records.front());
  table.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
  // Blank trailing lines parse as single empty fields; drop them.
  std::erase_if(table.rows, [](const auto& r) { return r.size() == 1 && r.front().empty(); });
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open CSV file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

// ---------------------------------------------------------------------------
// Schema

bool RowFilter::keep(std::string_view raw) const {
  switch (op) {
    case Op::kIn:
      return std::find(values.begin(), values.end(), raw) != values.end();
    case Op::kNotIn:
      return std::find(values.begin(), values.end(), raw) == values.end();
    case Op::kBetween: {
      const auto v = parse_number(raw);
      return v && *v >= lo && *v <= hi;
    }
  }
  return false;
}

SchemaConfig SchemaConfig::from_json(const Json& doc) {
  if (!doc.is_object()) throw SchemaError("schema must be a JSON object");
  SchemaConfig s;
  try {
    s.name = doc.value("name", std::string{"dataset"});
    s.target_column = doc.at("target_column").get<std::string>();
    const auto& pos = doc.at("positive_label");
    if (pos.is_array()) {
      s.positive_labels = pos.get<std::vector<std::string>>();
    } else {
      s.positive_labels = {pos.get<std::string>()};
    }
    s.protected_column = doc.at("protected_column").get<std::string>();
    if (doc.contains("privileged_value")) s.privileged_value = doc.at("privileged_value").get<std::string>();
    if (doc.contains("privileged_threshold")) {
      s.privileged_min = doc.at("privileged_threshold").at("min").get<double>();
    }
    for (const auto& f : doc.at("features")) {
      FeatureSpec spec;
      spec.name = f.at("name").get<std::string>();
      const auto kind = f.value("kind", std::string{"numeric"});
      if (kind == "numeric") {
        spec.kind = FeatureKind::kNumeric;
      } else if (kind == "categorical") {
        spec.kind = FeatureKind::kCategorical;
      } else {
        throw SchemaError("feature '" + spec.name + "' has unknown kind '" + kind + "'");
      }
      s.features.push_back(std::move(spec));
    }
    if (doc.contains("row_filter")) {
      for (const auto& f : doc.at("row_filter")) {
        RowFilter filter;
        filter.column = f.at("column").get<std::string>();
        if (f.contains("in")) {
          filter.op = RowFilter::Op::kIn;
          filter.values = f.at("in").get<std::vector<std::string>>();
        } else if (f.contains("not_in")) {
          filter.op = RowFilter::Op::kNotIn;
          filter.values = f.at("not_in").get<std::vector<std::string>>();
        } else if (f.contains("between")) {
          filter.op = RowFilter::Op::kBetween;
          const auto range = f.at("between").get<std::vector<double>>();
          if (range.size() != 2) throw SchemaError("row_filter 'between' needs [lo, hi]");
          filter.lo = range[0];
          filter.hi = range[1];
        } else {
          throw SchemaError("row_filter on '" + filter.column + "' needs one of in/not_in/between");
        }
        s.row_filter.push_back(std::move(filter));
      }
    }
    if (doc.contains("missing_values")) s.missing_values = doc.at("missing_values").get<std::vector<std::string>>();
    const auto policy = doc.value("missing_policy", std::string{"drop_row"});
    if (policy != "drop_row") throw SchemaError("unsupported missing_policy '" + policy + "'");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("invalid schema document: ") + e.what());
  }
  s.validate();
  return s;
}

Json SchemaConfig::to_json() const {
  Json doc;
  doc["name"] = name;
  doc["target_column"] = target_column;
  doc["positive_label"] = positive_labels;
  doc["protected_column"] = protected_column;
  if (privileged_value) doc["privileged_value"] = *privileged_value;
  if (privileged_min) doc["privileged_threshold"] = {{"min", *privileged_min}};
  Json feats = Json::array();
  for (const auto& f : features) {
    feats.push_back({{"name", f.name}, {"kind", f.kind == FeatureKind::kNumeric ? "numeric" : "categorical"}});
  }
  doc["features"] = feats;
  Json filters = Json::array();
  for (const auto& f : row_filter) {
    Json j{{"column", f.column}};
    switch (f.op) {
      case RowFilter::Op::kIn: j["in"] = f.values; break;
      case RowFilter::Op::kNotIn: j["not_in"] = f.values; break;
      case RowFilter::Op::kBetween: j["between"] = {f.lo, f.hi}; break;
    }
    filters.push_back(j);
  }
  doc["row_filter"] = filters;
  doc["missing_values"] = missing_values;
  doc["missing_policy"] = "drop_row";
  return doc;
}

void SchemaConfig::validate() const {
  if (target_column.empty()) throw SchemaError("target_column is empty");
  if (protected_column.empty()) throw SchemaError("protected_column is empty");
  if (positive_labels.empty()) throw SchemaError("positive_label is empty");
  if (privileged_value.has_value() == privileged_min.has_value()) {
    throw SchemaError("exactly one of privileged_value / privileged_threshold must be set");
  }
  if (features.empty()) throw SchemaError("no feature columns");
  std::set<std::string> seen;
  for (const auto& f : features) {
    if (f.name == target_column) throw SchemaError("target column '" + f.name + "' listed as a feature");
    if (f.name == protected_column) throw SchemaError("protected column '" + f.name + "' listed as a feature");
    if (!seen.insert(f.name).second) throw SchemaError("feature '" + f.name + "' listed twice");
  }
}

std::string SchemaConfig::hash() const { return fnv1a_hex(to_json().dump()); }

bool SchemaConfig::is_missing(std::string_view raw) const {
  const auto t = trim(raw);
  return std::find(missing_values.begin(), missing_values.end(), t) != missing_values.end();
}

std::uint8_t SchemaConfig::encode_group(std::string_view raw) const {
  if (privileged_value) return raw == *privileged_value ? 1 : 0;
  const auto v = parse_number(raw);
  if (!v) throw ParseError("protected attribute value '" + std::string(raw) + "' is not numeric");
  return *v >= *privileged_min ? 1 : 0;
}

std::uint8_t SchemaConfig::encode_label(std::string_view raw) const {
  return std::find(positive_labels.begin(), positive_labels.end(), raw) != positive_labels.end() ? 1 : 0;
}

SchemaConfig load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file: " + path.string());
  Json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema file " + path.string() + " is not valid JSON: " + e.what());
  }
  return SchemaConfig::from_json(doc);
}

// ---------------------------------------------------------------------------
// Dataset

void Dataset::validate() const {
  if (a.size() != n() || y.size() != n()) throw DataError("a/y length does not match X rows");
  std::array<std::size_t, 2> groups{};
  std::array<std::size_t, 2> labels{};
  for (std::size_t i = 0; i < n(); ++i) {
    if (a[i] > 1 || y[i] > 1) throw DataError("a and y must be 0/1");
    ++groups[a[i]];
    ++labels[y[i]];
  }
  if (groups[0] == 0 || groups[1] == 0) throw DataError("dataset '" + id + "' lacks one protected group");
  if (labels[0] == 0 || labels[1] == 0) throw DataError("dataset '" + id + "' lacks one label value");
  for (double v : X.data()) {
    if (!std::isfinite(v)) throw DataError("dataset '" + id + "' has non-finite features");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.X = X.select_rows(rows);
  out.a.reserve(rows.size());
  out.y.reserve(rows.size());
  out.source_row.reserve(rows.size());
  for (auto r : rows) {
    out.a.push_back(a[r]);
    out.y.push_back(y[r]);
    out.source_row.push_back(source_row.empty() ? r : source_row[r]);
  }
  out.feature_names = feature_names;
  out.numeric = numeric;
  out.id = id;
  out.schema_hash = schema_hash;
  return out;
}

Dataset encode_table(const CsvTable& table, const SchemaConfig& schema) {
  schema.validate();
  auto require = [&](const std::string& name) {
    const auto idx = table.column(name);
    if (!idx) throw SchemaError("column '" + name + "' not found in CSV header");
    return *idx;
  };
  const std::size_t target_col = require(schema.target_column);
  const std::size_t protected_col = require(schema.protected_column);
  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.features) feature_cols.push_back(require(f.name));
  std::vector<std::size_t> filter_cols;
  for (const auto& f : schema.row_filter) filter_cols.push_back(require(f.column));

  // Pass 1: filtering and missing-value policy.
  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      throw ParseError("row " + std::to_string(r + 1) + " (line " + std::to_string(r + 2) + ") has " +
                       std::to_string(row.size()) + " fields, header has " +
                       std::to_string(table.header.size()));
    }
    bool keep = true;
    for (std::size_t k = 0; k < schema.row_filter.size() && keep; ++k) {
      keep = schema.row_filter[k].keep(trim(row[filter_cols[k]]));
    }
    if (!keep) continue;
    if (schema.is_missing(row[target_col]) || schema.is_missing(row[protected_col])) continue;
    for (auto c : feature_cols) {
      if (schema.is_missing(row[c])) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(r);
  }
  if (kept.empty()) throw EmptyDatasetError("no rows left after filtering for dataset '" + schema.name + "'");

  // Pass 2: category levels.
  std::vector<std::vector<std::string>> levels(schema.features.size());
  for (std::size_t k = 0; k < schema.features.size(); ++k) {
    if (schema.features[k].kind != FeatureKind::kCategorical) continue;
    std::set<std::string> distinct;
    for (auto r : kept) distinct.insert(std::string(trim(table.rows[r][feature_cols[k]])));
    levels[k].assign(distinct.begin(), distinct.end());
  }

  Dataset ds;
  ds.id = schema.name;
  ds.schema_hash = schema.hash();
  std::vector<std::size_t> offset(schema.features.size());
  for (std::size_t k = 0; k < schema.features.size(); ++k) {
    offset[k] = ds.feature_names.size();
    const auto& f = schema.features[k];
    if (f.kind == FeatureKind::kNumeric) {
      ds.feature_names.push_back(f.name);
      ds.numeric.push_back(true);
    } else {
      for (std::size_t l = 1; l < levels[k].size(); ++l) {
        ds.feature_names.push_back(f.name + "=" + levels[k][l]);
        ds.numeric.push_back(false);
      }
    }
  }

  ds.X = Matrix(kept.size(), ds.feature_names.size());
  ds.a.resize(kept.size());
  ds.y.resize(kept.size());
  ds.source_row = kept;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto& row = table.rows[kept[i]];
    try {
      ds.a[i] = schema.encode_group(trim(row[protected_col]));
    } catch (const ParseError& e) {
      throw ParseError(cell_location(kept[i], schema.protected_column) + ": " + e.what());
    }
    ds.y[i] = schema.encode_label(trim(row[target_col]));
    for (std::size_t k = 0; k < schema.features.size(); ++k) {
      const auto raw = trim(row[feature_cols[k]]);
      const auto& f = schema.features[k];
      if (f.kind == FeatureKind::kNumeric) {
        const auto v = parse_number(raw);
        if (!v) {
          throw ParseError(cell_location(kept[i], f.name) + ": cannot parse '" + std::string(raw) + "' as a number");
        }
        ds.X(i, offset[k]) = *v;
      } else {
        const auto it = std::lower_bound(levels[k].begin(), levels[k].end(), raw);
        const auto level = static_cast<std::size_t>(it - levels[k].begin());
        if (level > 0) ds.X(i, offset[k] + level - 1) = 1.0;
      }
    }
  }
  ds.validate();
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const SchemaConfig& schema) {
  return encode_table(read_csv(path), schema);
}

// ---------------------------------------------------------------------------
// Splits

namespace {

// Largest-remainder apportionment of `total` train slots across strata.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes, double fraction, bool clamp_both_sides) {
  std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  const auto total = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
  std::vector<std::size_t> quota(sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const double exact = static_cast<double>(sizes[c]) * fraction;
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& l, const auto& r) { return l.first > r.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k) {
    ++quota[remainders[k].second];
    ++assigned;
  }
  if (clamp_both_sides) {
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      if (sizes[c] >= 2) quota[c] = std::clamp<std::size_t>(quota[c], 1, sizes[c] - 1);
    }
  }
  return quota;
}

}  // namespace

SplitIndices split_indices(std::span<const std::uint8_t> a, std::span<const std::uint8_t> y, const SplitPlan& plan) {
  if (!(plan.train_fraction > 0.0 && plan.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  if (a.size() != y.size()) throw ShapeError("a and y lengths differ");

  std::vector<std::vector<std::size_t>> cells(4);
  for (std::size_t i = 0; i < a.size(); ++i) cells[2 * a[i] + y[i]].push_back(i);

  SplitIndices out;
  const bool sparse_cell = std::any_of(cells.begin(), cells.end(), [](const auto& c) { return c.size() < 2; });
  if (sparse_cell) {
    out.label_only_fallback = true;
    std::vector<std::vector<std::size_t>> by_label(2);
    for (std::size_t i = 0; i < y.size(); ++i) by_label[y[i]].push_back(i);
    cells = std::move(by_label);
  }

  Rng rng(derive_seed(plan.seed, plan.repeat_index));
  std::vector<std::size_t> sizes;
  for (const auto& c : cells) sizes.push_back(c.size());
  const auto quota = apportion(sizes, plan.train_fraction, true);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto members = cells[c];
    rng.shuffle(members.begin(), members.end());
    out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(quota[c]), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

Split split(const Dataset& ds, const SplitPlan& plan) {
  Split s;
  s.indices = split_indices(ds.a, ds.y, plan);
  s.train = ds.subset(s.indices.train);
  s.test = ds.subset(s.indices.test);
  return s;
}

// ---------------------------------------------------------------------------
// Standardization

Standardizer fit_standardizer(const Dataset& train) {
  if (train.n() == 0) throw EmptyDatasetError("cannot fit a standardizer on an empty dataset");
  const std::size_t d = train.d();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  s.active.assign(d, false);
  const auto n = static_cast<double>(train.n());
  for (std::size_t j = 0; j < d; ++j) {
    if (!(j < train.numeric.size() && train.numeric[j])) continue;
    s.active[j] = true;
    double lo = train.X(0, j);
    double hi = lo;
    double sum = 0.0;
    for (std::size_t i = 0; i < train.n(); ++i) {
      const double v = train.X(i, j);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double mean = sum / n;
    s.mean[j] = mean;
    if (lo == hi) continue;  // constant column -> maps to zero
    double ss = 0.0;
    for (std::size_t i = 0; i < train.n(); ++i) {
      const double dv = train.X(i, j) - mean;
      ss += dv * dv;
    }
    s.scale[j] = std::sqrt(ss / n);
  }
  return s;
}

Dataset apply_standardizer(const Standardizer& s, const Dataset& ds) {
  if (s.mean.size() != ds.d()) throw ShapeError("standardizer width does not match dataset");
  Dataset out = ds;
  for (std::size_t i = 0; i < out.n(); ++i) {
    auto row = out.X.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!s.active[j]) continue;
      row[j] = s.scale[j] > 0.0 ? (row[j] - s.mean[j]) / s.scale[j] : 0.0;
    }
  }
  return out;
}

}  // namespace cafp
