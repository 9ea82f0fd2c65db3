#pragma once

#include <cstdint>
#include <vector>

#include "cafp/data.hpp"
#include "cafp/model.hpp"
#include "cafp/tree.hpp"

namespace cafp {

// ---------------------------------------------------------------------------
// Random forest

struct ForestConfig {
  int n_trees = 200;
  int max_depth = 12;
  int min_samples_leaf = 5;
  double feature_subsample = 0.0;  // <= 0 selects sqrt(D)/D of the D input columns
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

class ForestModel final : public ProbClassifier {
 public:
  ForestModel() = default;
  ForestModel(std::size_t n_features, std::vector<DecisionTree> trees, std::vector<std::uint64_t> tree_seeds,
              double feature_subsample);

  [[nodiscard]] std::size_t n_features() const override { return n_features_; }
  [[nodiscard]] double predict_proba(std::span<const double> x, std::uint8_t a) const override;
  [[nodiscard]] std::string kind() const override { return "forest"; }
  [[nodiscard]] Json to_json() const override;
  static ForestModel from_json(const Json& j);

  [[nodiscard]] const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  [[nodiscard]] const std::vector<std::uint64_t>& tree_seeds() const noexcept { return tree_seeds_; }
  [[nodiscard]] double feature_subsample() const noexcept { return feature_subsample_; }

 private:
  std::size_t n_features_ = 0;
  std::vector<DecisionTree> trees_;
  std::vector<std::uint64_t> tree_seeds_;
  double feature_subsample_ = 1.0;
};

// Tree t draws its bootstrap sample and split columns from seed + t, so the
// result does not depend on how trees are scheduled across threads.
ForestModel train_forest(const Dataset& train, const ForestConfig& cfg = {});

// ---------------------------------------------------------------------------
// Gradient-boosted trees

struct GbtConfig {
  int n_trees = 200;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_samples_leaf = 1;
  std::uint64_t seed = 0;  // no row or column subsampling, so the fit is seed independent
};

class GbtModel final : public ProbClassifier {
 public:
  GbtModel() = default;
  GbtModel(std::size_t n_features, std::vector<DecisionTree> trees, double learning_rate, double base_score,
           std::vector<double> loss_history = {});

  [[nodiscard]] std::size_t n_features() const override { return n_features_; }
  [[nodiscard]] double predict_proba(std::span<const double> x, std::uint8_t a) const override;
  [[nodiscard]] std::string kind() const override { return "gbt"; }
  [[nodiscard]] Json to_json() const override;
  static GbtModel from_json(const Json& j);

  [[nodiscard]] double raw_score(std::span<const double> x, std::uint8_t a) const noexcept;
  [[nodiscard]] const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  [[nodiscard]] double learning_rate() const noexcept { return learning_rate_; }
  [[nodiscard]] double base_score() const noexcept { return base_score_; }
  // Mean training log-loss before the first round and after each round.
  [[nodiscard]] const std::vector<double>& loss_history() const noexcept { return loss_history_; }

 private:
  std::size_t n_features_ = 0;
  std::vector<DecisionTree> trees_;
  double learning_rate_ = 0.1;
  double base_score_ = 0.0;
  std::vector<double> loss_history_;
};

// Stagewise boosting on log-loss: each round fits a least-squares tree to the
// residuals y - p, then sets every leaf to the Newton step sum(r)/sum(p(1-p)).
// The shrunk step is halved while it would raise that leaf's training loss.
GbtModel train_gbt(const Dataset& train, const GbtConfig& cfg = {});

}  // namespace cafp
