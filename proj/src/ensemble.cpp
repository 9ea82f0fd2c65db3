#include "cafp/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "cafp/errors.hpp"
#include "cafp/random.hpp"

namespace cafp {

namespace {

// Runs body(i) for i in [0, n) across worker threads. Each index writes only
// its own output slot, so results do not depend on scheduling.
template <class Body>
void parallel_for(std::size_t n, Body body) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double log_loss_term(std::uint8_t y, double f) noexcept {
  const double softplus = f > 0.0 ? f + std::log1p(std::exp(-f)) : std::log1p(std::exp(f));
  return softplus - (y ? f : 0.0);
}

void check_training_set(const Dataset& train) {
  if (train.n() == 0) throw EmptyDatasetError("cannot train on an empty dataset");
  if (train.a.size() != train.n() || train.y.size() != train.n()) {
    throw ShapeError("label or protected attribute length does not match row count");
  }
}

std::vector<DecisionTree> trees_from_json(const Json& arr) {
  std::vector<DecisionTree> trees;
  trees.reserve(arr.size());
  for (const auto& t : arr) trees.push_back(DecisionTree::from_json(t));
  return trees;
}

void check_tree_features(const std::vector<DecisionTree>& trees, std::size_t n_features) {
  for (const auto& tree : trees) {
    if (tree.nodes().empty()) throw ParseError("empty tree");
    for (const auto& node : tree.nodes()) {
      if (node.feature > static_cast<std::int32_t>(n_features)) throw ParseError("tree feature index out of range");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Forest

ForestModel::ForestModel(std::size_t n_features, std::vector<DecisionTree> trees, std::vector<std::uint64_t> tree_seeds,
                         double feature_subsample)
    : n_features_(n_features),
      trees_(std::move(trees)),
      tree_seeds_(std::move(tree_seeds)),
      feature_subsample_(feature_subsample) {
  if (trees_.empty()) throw ShapeError("forest needs at least one tree");
  check_tree_features(trees_, n_features_);
}

double ForestModel::predict_proba(std::span<const double> x, std::uint8_t a) const {
  check_input(x.size(), a);
  // Summing in sorted order makes the result independent of tree order.
  thread_local std::vector<double> leaves;
  leaves.resize(trees_.size());
  for (std::size_t t = 0; t < trees_.size(); ++t) leaves[t] = trees_[t].predict(x, a);
  std::sort(leaves.begin(), leaves.end());
  double sum = 0.0;
  for (double v : leaves) sum += v;
  return std::clamp(sum / static_cast<double>(trees_.size()), 0.0, 1.0);
}

Json ForestModel::to_json() const {
  Json trees = Json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return Json{{"n_features", n_features_},
              {"feature_subsample", feature_subsample_},
              {"tree_seeds", tree_seeds_},
              {"trees", std::move(trees)}};
}

ForestModel ForestModel::from_json(const Json& j) {
  return ForestModel(j.at("n_features").get<std::size_t>(), trees_from_json(j.at("trees")),
                     j.value("tree_seeds", std::vector<std::uint64_t>{}), j.value("feature_subsample", 1.0));
}

ForestModel train_forest(const Dataset& train, const ForestConfig& cfg) {
  check_training_set(train);
  if (cfg.n_trees < 1) throw ConfigError("n_trees must be at least 1");
  const ColumnRanks cols(train.X, train.a);
  const auto n = train.n();
  const double total_cols = static_cast<double>(cols.columns());
  const double fraction =
      cfg.feature_subsample > 0.0 ? std::min(1.0, cfg.feature_subsample) : std::sqrt(total_cols) / total_cols;

  const auto n_trees = static_cast<std::size_t>(cfg.n_trees);
  std::vector<DecisionTree> trees(n_trees);
  std::vector<std::uint64_t> seeds(n_trees);
  parallel_for(n_trees, [&](std::size_t t) {
    seeds[t] = cfg.seed + t;
    Rng rng(mix64(seeds[t]));
    std::vector<std::uint32_t> weights(n, 1);
    if (cfg.bootstrap) {
      std::fill(weights.begin(), weights.end(), 0u);
      for (std::size_t i = 0; i < n; ++i) ++weights[rng.below(n)];
    }
    TreeParams params{cfg.max_depth, cfg.min_samples_leaf, fraction, rng.next()};
    trees[t] = grow_gini_tree(cols, train.y, weights, params);
  });
  return ForestModel(train.d(), std::move(trees), std::move(seeds), fraction);
}

// ---------------------------------------------------------------------------
// Gradient boosting

GbtModel::GbtModel(std::size_t n_features, std::vector<DecisionTree> trees, double learning_rate, double base_score,
                   std::vector<double> loss_history)
    : n_features_(n_features),
      trees_(std::move(trees)),
      learning_rate_(learning_rate),
      base_score_(base_score),
      loss_history_(std::move(loss_history)) {
  if (!std::isfinite(learning_rate_) || !std::isfinite(base_score_)) {
    throw DivergenceError("non-finite boosting parameters");
  }
  check_tree_features(trees_, n_features_);
}

double GbtModel::raw_score(std::span<const double> x, std::uint8_t a) const noexcept {
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(x, a);
  return base_score_ + learning_rate_ * sum;
}

double GbtModel::predict_proba(std::span<const double> x, std::uint8_t a) const {
  check_input(x.size(), a);
  return sigmoid(raw_score(x, a));
}

Json GbtModel::to_json() const {
  Json trees = Json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return Json{{"n_features", n_features_},
              {"learning_rate", learning_rate_},
              {"base_score", base_score_},
              {"trees", std::move(trees)}};
}

GbtModel GbtModel::from_json(const Json& j) {
  return GbtModel(j.at("n_features").get<std::size_t>(), trees_from_json(j.at("trees")),
                  j.at("learning_rate").get<double>(), j.at("base_score").get<double>());
}

GbtModel train_gbt(const Dataset& train, const GbtConfig& cfg) {
  check_training_set(train);
  if (cfg.n_trees < 0) throw ConfigError("n_trees must be non-negative");
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative");
  }
  const auto n = train.n();
  double positives = 0.0;
  for (auto v : train.y) positives += v;
  const double rate = std::clamp(positives / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
  const double base = std::log(rate / (1.0 - rate));

  std::vector<double> f(n, base);
  auto mean_loss = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += log_loss_term(train.y[i], f[i]);
    return s / static_cast<double>(n);
  };
  std::vector<double> history{mean_loss()};
  std::vector<DecisionTree> trees;
  if (cfg.n_trees == 0) return GbtModel(train.d(), {}, cfg.learning_rate, base, std::move(history));

  const ColumnRanks cols(train.X, train.a);
  const TreeParams params{cfg.max_depth, cfg.min_samples_leaf, 1.0, cfg.seed};
  std::vector<double> p(n);
  std::vector<double> residual(n);
  std::vector<std::int32_t> leaf_of_row;

  for (int round = 0; round < cfg.n_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = sigmoid(f[i]);
      residual[i] = static_cast<double>(train.y[i]) - p[i];
    }
    DecisionTree tree = grow_regression_tree(cols, residual, params, &leaf_of_row);
    auto& nodes = tree.mutable_nodes();

    std::vector<std::vector<std::uint32_t>> members(nodes.size());
    for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(leaf_of_row[i])].push_back(static_cast<std::uint32_t>(i));

    for (std::size_t leaf = 0; leaf < nodes.size(); ++leaf) {
      if (!nodes[leaf].is_leaf()) continue;
      const auto& rows = members[leaf];
      double g = 0.0;
      double h = 0.0;
      for (auto i : rows) {
        g += residual[i];
        h += p[i] * (1.0 - p[i]);
      }
      double step = h > 1e-12 ? g / h : 0.0;
      if (!rows.empty() && step != 0.0 && cfg.learning_rate > 0.0) {
        double before = 0.0;
        for (auto i : rows) before += log_loss_term(train.y[i], f[i]);
        auto loss_at = [&](double s) {
          double after = 0.0;
          for (auto i : rows) after += log_loss_term(train.y[i], f[i] + cfg.learning_rate * s);
          return after;
        };
        int halvings = 0;
        while (loss_at(step) > before && halvings < 50) {
          step *= 0.5;
          ++halvings;
        }
        if (loss_at(step) > before) step = 0.0;
      }
      nodes[leaf].value = step;
      for (auto i : rows) f[i] += cfg.learning_rate * step;
    }
    history.push_back(mean_loss());
    trees.push_back(std::move(tree));
  }
  return GbtModel(train.d(), std::move(trees), cfg.learning_rate, base, std::move(history));
}

}  // namespace cafp
