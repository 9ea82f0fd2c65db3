#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "cafp/data.hpp"
#include "cafp/errors.hpp"
#include "cafp/random.hpp"
#include "test_util.hpp"

using namespace cafp;
using cafp::testing::make_dataset;
using cafp::testing::write_temp;

namespace {

const char* kAdultSchema = R"({
  "name": "mini_adult",
  "target_column": "income",
  "positive_label": [">50K", ">50K."],
  "protected_column": "sex",
  "privileged_value": "Male",
  "features": [{"name": "age", "kind": "numeric"}, {"name": "job", "kind": "categorical"}],
  "missing_values": ["", "?"]
})";

const char* kAdultCsv =
    "age,job,sex,income\n"
    "39,clerk,Male,<=50K\n"
    "50,exec,Female,>50K\n"
    "38,clerk,Female,<=50K\n"
    "53,sales,Male,>50K.\n";

SchemaConfig schema_from(const char* text) { return SchemaConfig::from_json(Json::parse(text)); }

}  // namespace

TEST_CASE("csv parser handles quotes, CRLF and a BOM") {
  const auto t = parse_csv("\xEF\xBB\xBFname,note\r\n\"Smith, J\",\"said \"\"hi\"\"\"\r\nLee,\r\n");
  REQUIRE(t.header == std::vector<std::string>{"name", "note"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][0] == "Smith, J");
  CHECK(t.rows[0][1] == "said \"hi\"");
  CHECK(t.rows[1][1].empty());
  CHECK(t.column("note") == 1u);
  CHECK_FALSE(t.column("missing").has_value());
}

TEST_CASE("csv parser rejects an unterminated quote") {
  CHECK_THROWS_AS(parse_csv("a,b\n\"x,1\n"), ParseError);
}

TEST_CASE("protected attribute follows the privileged value") {
  const auto ds = encode_table(parse_csv(kAdultCsv), schema_from(kAdultSchema));
  REQUIRE(ds.n() == 4);
  CHECK(ds.a == std::vector<std::uint8_t>{1, 0, 0, 1});
  CHECK(ds.y == std::vector<std::uint8_t>{0, 1, 0, 1});
  // job levels sorted {clerk, exec, sales}; clerk dropped
  CHECK(ds.feature_names == std::vector<std::string>{"age", "job=exec", "job=sales"});
  CHECK(ds.X(1, 1) == 1.0);
  CHECK(ds.X(3, 2) == 1.0);
  CHECK(ds.X(0, 1) + ds.X(0, 2) == 0.0);
  CHECK(ds.numeric == std::vector<bool>{true, false, false});
}

TEST_CASE("numeric threshold binarizes age at 25") {
  const char* schema = R"({
    "target_column": "risk", "positive_label": "1", "protected_column": "age",
    "privileged_threshold": {"min": 25},
    "features": [{"name": "amount", "kind": "numeric"}]
  })";
  const auto ds = encode_table(parse_csv("amount,age,risk\n100,24,1\n200,25,0\n300,60,1\n400,19,0\n"),
                               schema_from(schema));
  CHECK(ds.a == std::vector<std::uint8_t>{0, 1, 1, 0});
}

TEST_CASE("rows with a missing cell are dropped") {
  const auto ds = encode_table(parse_csv("age,job,sex,income\n39,clerk,Male,>50K\n41,?,Male,<=50K\n30,exec,Female,<=50K\n"),
                               schema_from(kAdultSchema));
  CHECK(ds.n() == 2);
  CHECK(ds.source_row == std::vector<std::size_t>{0, 2});
}

TEST_CASE("row filters keep listed values and numeric ranges") {
  const char* schema = R"({
    "target_column": "y", "positive_label": "1", "protected_column": "race",
    "privileged_value": "W",
    "features": [{"name": "v", "kind": "numeric"}],
    "row_filter": [{"column": "race", "in": ["W", "B"]}, {"column": "v", "between": [0, 10]}]
  })";
  const auto ds = encode_table(parse_csv("v,race,y\n1,W,1\n2,A,0\n3,B,0\n11,B,1\n4,B,1\n5,W,0\n"), schema_from(schema));
  CHECK(ds.source_row == std::vector<std::size_t>{0, 2, 4, 5});
}

TEST_CASE("schema and parse errors") {
  SUBCASE("missing column") {
    CHECK_THROWS_AS(encode_table(parse_csv("age,sex,income\n1,Male,>50K\n"), schema_from(kAdultSchema)), SchemaError);
  }
  SUBCASE("unparseable numeric names row and column") {
    try {
      encode_table(parse_csv("age,job,sex,income\n39,clerk,Male,>50K\nold,exec,Female,<=50K\n"),
                   schema_from(kAdultSchema));
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("age") != std::string::npos);
      CHECK(msg.find("row 2") != std::string::npos);
    }
  }
  SUBCASE("empty after filtering") {
    CHECK_THROWS_AS(encode_table(parse_csv("age,job,sex,income\n?,clerk,Male,>50K\n"), schema_from(kAdultSchema)),
                    EmptyDatasetError);
  }
  SUBCASE("target listed as feature") {
    CHECK_THROWS_AS(schema_from(R"({"target_column": "y", "positive_label": "1", "protected_column": "a",
      "privileged_value": "1", "features": [{"name": "y"}]})"),
                    SchemaError);
  }
  SUBCASE("both privileged rules") {
    CHECK_THROWS_AS(schema_from(R"({"target_column": "y", "positive_label": "1", "protected_column": "a",
      "privileged_value": "1", "privileged_threshold": {"min": 3}, "features": [{"name": "x"}]})"),
                    SchemaError);
  }
  SUBCASE("single protected group") {
    CHECK_THROWS_AS(encode_table(parse_csv("age,job,sex,income\n39,clerk,Male,>50K\n40,exec,Male,<=50K\n"),
                                 schema_from(kAdultSchema)),
                    DataError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_csv("/nonexistent/dir/file.csv"), ParseError);
  }
}

TEST_CASE("schema file round trip and hash stability") {
  const auto path = write_temp("schema.json", kAdultSchema);
  const auto s = load_schema(path);
  const auto again = SchemaConfig::from_json(s.to_json());
  CHECK(s.hash() == again.hash());
  auto other = s;
  other.privileged_value = "Female";
  CHECK(other.hash() != s.hash());
}

// ---------------------------------------------------------------------------
// Splits

namespace {

Dataset balanced_cells(std::size_t per_cell) {
  std::vector<std::vector<double>> rows;
  std::vector<std::uint8_t> a, y;
  for (std::uint8_t g = 0; g < 2; ++g) {
    for (std::uint8_t l = 0; l < 2; ++l) {
      for (std::size_t k = 0; k < per_cell; ++k) {
        rows.push_back({static_cast<double>(rows.size())});
        a.push_back(g);
        y.push_back(l);
      }
    }
  }
  return make_dataset(rows, a, y);
}

}  // namespace

TEST_CASE("split sizes follow the train fraction") {
  const auto ds = balanced_cells(25);
  const auto s = split(ds, SplitPlan{1, 0.7, 0});
  CHECK(s.train.n() == 70);
  CHECK(s.test.n() == 30);
}

TEST_CASE("split is a disjoint exhaustive partition and deterministic") {
  const auto ds = balanced_cells(25);
  const auto s1 = split_indices(ds.a, ds.y, SplitPlan{3, 0.7, 2});
  const auto s2 = split_indices(ds.a, ds.y, SplitPlan{3, 0.7, 2});
  CHECK(s1.train == s2.train);
  CHECK(s1.test == s2.test);
  std::set<std::size_t> all(s1.train.begin(), s1.train.end());
  for (auto i : s1.test) CHECK(all.insert(i).second);
  CHECK(all.size() == ds.n());

  const auto s3 = split_indices(ds.a, ds.y, SplitPlan{3, 0.7, 3});
  CHECK(s3.train != s1.train);
}

TEST_CASE("balanced 40-row dataset splits 7/3 in every cell") {
  const auto ds = balanced_cells(10);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = split_indices(ds.a, ds.y, SplitPlan{seed, 0.7, 0});
    // Oracle: count members of each (a, y) cell on each side.
    int train_cells[4] = {0, 0, 0, 0};
    int test_cells[4] = {0, 0, 0, 0};
    for (auto i : s.train) ++train_cells[2 * ds.a[i] + ds.y[i]];
    for (auto i : s.test) ++test_cells[2 * ds.a[i] + ds.y[i]];
    for (int c = 0; c < 4; ++c) {
      CHECK(train_cells[c] == 7);
      CHECK(test_cells[c] == 3);
    }
  }
}

TEST_CASE("tiny cells fall back to label-only stratification") {
  const auto ds = make_dataset({{0}, {1}, {2}, {3}, {4}, {5}, {6}}, {0, 0, 0, 1, 1, 1, 1}, {0, 0, 1, 0, 1, 1, 1});
  // cell (a=0, y=1) has one member
  const auto s = split_indices(ds.a, ds.y, SplitPlan{0, 0.5, 0});
  CHECK(s.label_only_fallback);
  CHECK(s.train.size() + s.test.size() == ds.n());
}

TEST_CASE("split rejects fractions outside (0,1)") {
  const auto ds = balanced_cells(5);
  CHECK_THROWS_AS(split(ds, SplitPlan{0, 1.0, 0}), ConfigError);
  CHECK_THROWS_AS(split(ds, SplitPlan{0, 0.0, 0}), ConfigError);
}

// ---------------------------------------------------------------------------
// Standardizer

TEST_CASE("standardizer uses population statistics") {
  const auto ds = make_dataset({{1, 5}, {2, 5}, {3, 5}}, {0, 1, 0}, {0, 1, 1});
  const auto st = fit_standardizer(ds);
  const auto out = apply_standardizer(st, ds);
  const double sd = std::sqrt(2.0 / 3.0);  // oracle: population SD of {1,2,3}
  CHECK(st.mean[0] == doctest::Approx(2.0));
  CHECK(out.X(0, 0) == doctest::Approx(-1.0 / sd).epsilon(1e-12));
  CHECK(out.X(0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(out.X(1, 0) == 0.0);
  CHECK(out.X(2, 0) == doctest::Approx(1.0 / sd).epsilon(1e-12));
  for (std::size_t i = 0; i < 3; ++i) CHECK(out.X(i, 1) == 0.0);  // constant column
}

TEST_CASE("standardizer leaves one-hot columns and centers at the train mean") {
  auto ds = make_dataset({{10, 1}, {20, 0}, {30, 1}}, {0, 1, 0}, {0, 1, 1});
  ds.numeric = {true, false};
  const auto st = fit_standardizer(ds);
  const auto test = make_dataset({{20, 1}}, {0}, {1});
  auto test_ds = test;
  test_ds.numeric = ds.numeric;
  const auto out = apply_standardizer(st, test_ds);
  CHECK(out.X(0, 0) == 0.0);
  CHECK(out.X(0, 1) == 1.0);
}

TEST_CASE("standardized training columns have zero mean and unit variance") {
  cafp::Rng rng(5);
  std::vector<std::vector<double>> rows;
  std::vector<std::uint8_t> a, y;
  for (int i = 0; i < 500; ++i) {
    rows.push_back({rng.normal() * 7 + 3, rng.uniform() * 100, 4.0});
    a.push_back(i % 2);
    y.push_back((i / 2) % 2);
  }
  const auto ds = make_dataset(rows, a, y);
  const auto out = apply_standardizer(fit_standardizer(ds), ds);
  for (std::size_t j = 0; j < 2; ++j) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < out.n(); ++i) m += out.X(i, j);
    m /= out.n();
    for (std::size_t i = 0; i < out.n(); ++i) v += (out.X(i, j) - m) * (out.X(i, j) - m);
    v /= out.n();
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(v - 1.0) < 1e-9);
  }
}

// ---------------------------------------------------------------------------
// Real data round trip (skipped when the fetched CSVs are absent)

TEST_CASE("adult encoding matches the raw CSV for every retained row") {
  const std::filesystem::path csv = CAFP_DATA_DIR "/adult.csv";
  const std::filesystem::path schema = CAFP_SCHEMA_DIR "/adult.json";
  if (!std::filesystem::exists(csv)) {
    MESSAGE("adult.csv not present; skipping");
    return;
  }
  const auto table = read_csv(csv);
  const auto sc = load_schema(schema);
  const auto ds = encode_table(table, sc);
  const auto sex = *table.column("sex");
  const auto income = *table.column("income");
  CHECK(ds.n() > 40000);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto& row = table.rows[ds.source_row[i]];
    const std::uint8_t a = row[sex] == "Male" ? 1 : 0;
    const std::uint8_t y = (row[income] == ">50K" || row[income] == ">50K.") ? 1 : 0;
    REQUIRE(ds.a[i] == a);
    REQUIRE(ds.y[i] == y);
  }
}
