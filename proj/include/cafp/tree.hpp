#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "cafp/matrix.hpp"

namespace cafp {

using Json = nlohmann::json;

// Internal nodes route x[feature] <= threshold to `left`. A feature index equal
// to the model's feature dimension addresses the protected attribute.
struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // leaf output

  [[nodiscard]] bool is_leaf() const noexcept { return feature < 0; }
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  [[nodiscard]] double predict(std::span<const double> x, std::uint8_t a) const noexcept;
  // Index of the leaf reached by (x, a).
  [[nodiscard]] std::size_t leaf_index(std::span<const double> x, std::uint8_t a) const noexcept;

  [[nodiscard]] const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::vector<TreeNode>& mutable_nodes() noexcept { return nodes_; }
  [[nodiscard]] std::size_t depth() const;
  [[nodiscard]] std::size_t leaf_count() const;

  // True when no root-to-leaf path holds contradictory thresholds on one feature,
  // i.e. every leaf is reachable.
  [[nodiscard]] bool paths_consistent() const;

  [[nodiscard]] Json to_json() const;
  static DecisionTree from_json(const Json& j);

 private:
  std::vector<TreeNode> nodes_;
};

// Growth limits shared by the forest and boosting learners.
struct TreeParams {
  int max_depth = 12;
  int min_samples_leaf = 1;
  double feature_fraction = 1.0;  // fraction of input columns tried per split
  std::uint64_t seed = 0;
};

// Sorted distinct values and per-row ranks for every input column
// (features, then the protected attribute). Built once per training set so
// split search at a node is a counting pass over ranks.
class ColumnRanks {
 public:
  ColumnRanks(const Matrix& X, std::span<const std::uint8_t> a);

  [[nodiscard]] std::size_t columns() const noexcept { return values_.size(); }
  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] const std::vector<double>& values(std::size_t col) const noexcept { return values_[col]; }
  [[nodiscard]] const std::vector<std::uint32_t>& ranks(std::size_t col) const noexcept { return ranks_[col]; }

 private:
  std::size_t rows_ = 0;
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<std::uint32_t>> ranks_;
};

// CART classification tree with Gini impurity. `weights` holds the bootstrap
// multiplicity of each row (0 = out of sample); min_samples_leaf is measured
// in weighted rows. Candidate thresholds are midpoints between consecutive
// distinct values; equal gains resolve to the lowest feature index, then the
// lowest threshold. Leaves hold the weighted positive fraction.
DecisionTree grow_gini_tree(const ColumnRanks& cols, std::span<const std::uint8_t> y,
                            std::span<const std::uint32_t> weights, const TreeParams& params);

// Least-squares regression tree on `target`. Leaves hold the mean target; the
// returned vector maps each training row to its leaf node index.
DecisionTree grow_regression_tree(const ColumnRanks& cols, std::span<const double> target, const TreeParams& params,
                                  std::vector<std::int32_t>* leaf_of_row = nullptr);

}  // namespace cafp
