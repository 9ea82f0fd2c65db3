#include "cafp/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cafp/errors.hpp"
#include "cafp/random.hpp"

namespace cafp {

// ---------------------------------------------------------------------------
// DecisionTree

std::size_t DecisionTree::leaf_index(std::span<const double> x, std::uint8_t a) const noexcept {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& node = nodes_[i];
    const auto f = static_cast<std::size_t>(node.feature);
    const double v = f < x.size() ? x[f] : static_cast<double>(a);
    i = static_cast<std::size_t>(v <= node.threshold ? node.left : node.right);
  }
  return i;
}

double DecisionTree::predict(std::span<const double> x, std::uint8_t a) const noexcept {
  return nodes_[leaf_index(x, a)].value;
}

std::size_t DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes_[i].is_leaf()) {
      stack.emplace_back(static_cast<std::size_t>(nodes_[i].left), d + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes_[i].right), d + 1);
    }
  }
  return best;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.is_leaf(); }));
}

bool DecisionTree::paths_consistent() const {
  if (nodes_.empty()) return false;
  struct Frame {
    std::size_t node;
    std::vector<std::pair<double, double>> bounds;  // per feature: (lo, hi], open below
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::int32_t max_feature = 0;
  for (const auto& n : nodes_) max_feature = std::max(max_feature, n.feature);
  std::vector<Frame> stack;
  stack.push_back({0, std::vector<std::pair<double, double>>(static_cast<std::size_t>(max_feature) + 1, {-kInf, kInf})});
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    const auto& node = nodes_[f.node];
    if (node.is_leaf()) continue;
    const auto feat = static_cast<std::size_t>(node.feature);
    const auto [lo, hi] = f.bounds[feat];
    if (!(node.threshold > lo && node.threshold < hi)) return false;
    Frame left{static_cast<std::size_t>(node.left), f.bounds};
    left.bounds[feat].second = node.threshold;
    Frame right{static_cast<std::size_t>(node.right), std::move(f.bounds)};
    right.bounds[feat].first = node.threshold;
    stack.push_back(std::move(left));
    stack.push_back(std::move(right));
  }
  return true;
}

Json DecisionTree::to_json() const {
  Json feature = Json::array();
  Json threshold = Json::array();
  Json left = Json::array();
  Json right = Json::array();
  Json value = Json::array();
  for (const auto& n : nodes_) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return Json{{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}

DecisionTree DecisionTree::from_json(const Json& j) {
  const auto feature = j.at("feature").get<std::vector<std::int32_t>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<std::int32_t>>();
  const auto right = j.at("right").get<std::vector<std::int32_t>>();
  const auto value = j.at("value").get<std::vector<double>>();
  const std::size_t n = feature.size();
  if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || value.size() != n) {
    throw ParseError("tree node arrays have inconsistent lengths");
  }
  std::vector<TreeNode> nodes(n);
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i]};
    if (feature[i] >= 0) {
      const auto in_range = [n](std::int32_t c) { return c > 0 && static_cast<std::size_t>(c) < n; };
      if (!in_range(left[i]) || !in_range(right[i])) throw ParseError("tree child index out of range");
    }
  }
  return DecisionTree(std::move(nodes));
}

// ---------------------------------------------------------------------------
// ColumnRanks

ColumnRanks::ColumnRanks(const Matrix& X, std::span<const std::uint8_t> a) : rows_(X.rows()) {
  if (a.size() != X.rows()) throw ShapeError("protected attribute length does not match row count");
  const std::size_t cols = X.cols() + 1;
  values_.resize(cols);
  ranks_.resize(cols);
  std::vector<double> column(rows_);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t i = 0; i < rows_; ++i) column[i] = c < X.cols() ? X(i, c) : static_cast<double>(a[i]);
    auto& vals = values_[c];
    vals = column;
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    auto& rk = ranks_[c];
    rk.resize(rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
      rk[i] = static_cast<std::uint32_t>(std::lower_bound(vals.begin(), vals.end(), column[i]) - vals.begin());
    }
  }
}

// ---------------------------------------------------------------------------
// Growing

namespace {

constexpr double kMinGain = 1e-12;

struct ClassStats {
  double w = 0.0;
  double pos = 0.0;
  void merge(const ClassStats& o) noexcept {
    w += o.w;
    pos += o.pos;
  }
};

struct GiniPolicy {
  std::span<const std::uint8_t> y;
  std::span<const std::uint32_t> weights;

  void add(ClassStats& s, std::uint32_t row) const noexcept {
    const double w = weights[row];
    s.w += w;
    s.pos += w * y[row];
  }
  static ClassStats minus(const ClassStats& total, const ClassStats& part) noexcept {
    return {total.w - part.w, total.pos - part.pos};
  }
  static double count(const ClassStats& s) noexcept { return s.w; }
  static bool pure(const ClassStats& s) noexcept { return s.pos <= 0.0 || s.pos >= s.w; }
  static double gini(const ClassStats& s) noexcept {
    const double q = s.pos / s.w;
    return 2.0 * q * (1.0 - q);
  }
  static double gain(const ClassStats& parent, const ClassStats& l, const ClassStats& r) noexcept {
    return gini(parent) - (l.w * gini(l) + r.w * gini(r)) / parent.w;
  }
  static double leaf(const ClassStats& s) noexcept { return s.w > 0.0 ? s.pos / s.w : 0.0; }
};

struct RegStats {
  double n = 0.0;
  double sum = 0.0;
  void merge(const RegStats& o) noexcept {
    n += o.n;
    sum += o.sum;
  }
};

struct SsePolicy {
  std::span<const double> target;

  void add(RegStats& s, std::uint32_t row) const noexcept {
    s.n += 1.0;
    s.sum += target[row];
  }
  static RegStats minus(const RegStats& total, const RegStats& part) noexcept {
    return {total.n - part.n, total.sum - part.sum};
  }
  static double count(const RegStats& s) noexcept { return s.n; }
  static bool pure(const RegStats&) noexcept { return false; }
  static double gain(const RegStats& parent, const RegStats& l, const RegStats& r) noexcept {
    return (l.sum * l.sum / l.n + r.sum * r.sum / r.n - parent.sum * parent.sum / parent.n) / parent.n;
  }
  static double leaf(const RegStats& s) noexcept { return s.n > 0.0 ? s.sum / s.n : 0.0; }
};

template <class Stats, class Policy>
class Grower {
 public:
  Grower(const ColumnRanks& cols, Policy policy, const TreeParams& params)
      : cols_(cols), policy_(policy), params_(params), rng_(mix64(params.seed)) {
    if (params.max_depth < 0) throw ConfigError("max_depth must be non-negative");
    if (params.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be at least 1");
    const std::size_t total = cols.columns();
    const double frac = params.feature_fraction <= 0.0 ? 1.0 : std::min(1.0, params.feature_fraction);
    try_count_ = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(frac * static_cast<double>(total))), 1,
                                         total);
    perm_.resize(total);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  }

  DecisionTree grow(std::vector<std::uint32_t> rows, std::vector<std::int32_t>* leaf_of_row) {
    rows_ = std::move(rows);
    leaf_of_row_ = leaf_of_row;
    if (leaf_of_row_) leaf_of_row_->assign(cols_.rows(), -1);
    if (rows_.empty()) {
      nodes_.push_back(TreeNode{});
    } else {
      build(0, rows_.size(), 0);
    }
    return DecisionTree(std::move(nodes_));
  }

 private:
  struct Candidate {
    std::int32_t feature = -1;
    std::uint32_t cut = 0;  // highest rank routed left
    double threshold = 0.0;
    double gain = kMinGain;
  };

  std::int32_t build(std::size_t begin, std::size_t end, int depth) {
    Stats total;
    for (std::size_t k = begin; k < end; ++k) policy_.add(total, rows_[k]);
    const auto idx = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(TreeNode{-1, 0.0, -1, -1, Policy::leaf(total)});

    const double min_leaf = params_.min_samples_leaf;
    Candidate best;
    if (depth < params_.max_depth && Policy::count(total) >= 2.0 * min_leaf && !Policy::pure(total)) {
      best = find_split(begin, end, total);
    }
    if (best.feature < 0) {
      if (leaf_of_row_) {
        for (std::size_t k = begin; k < end; ++k) (*leaf_of_row_)[rows_[k]] = idx;
      }
      return idx;
    }

    const auto& rk = cols_.ranks(static_cast<std::size_t>(best.feature));
    const auto mid_it = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                              rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                              [&](std::uint32_t r) { return rk[r] <= best.cut; });
    const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());
    const auto left = build(begin, mid, depth + 1);
    const auto right = build(mid, end, depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(idx)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return idx;
  }

  std::vector<std::size_t> candidate_features() {
    const std::size_t total = perm_.size();
    if (try_count_ >= total) return perm_;
    // Partial Fisher-Yates over a fresh identity permutation.
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    for (std::size_t i = 0; i < try_count_; ++i) {
      const auto j = i + static_cast<std::size_t>(rng_.below(total - i));
      std::swap(perm_[i], perm_[j]);
    }
    std::vector<std::size_t> chosen(perm_.begin(), perm_.begin() + static_cast<std::ptrdiff_t>(try_count_));
    std::sort(chosen.begin(), chosen.end());
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    return chosen;
  }

  Candidate find_split(std::size_t begin, std::size_t end, const Stats& total) {
    Candidate best;
    const std::size_t n_node = end - begin;
    const double min_leaf = params_.min_samples_leaf;
    for (const std::size_t f : candidate_features()) {
      const auto& vals = cols_.values(f);
      const std::size_t k = vals.size();
      if (k < 2) continue;
      const auto& rk = cols_.ranks(f);

      Stats left;
      std::int64_t prev = -1;
      auto visit = [&](std::uint32_t r, const Stats& bucket) {
        if (prev >= 0) {
          const Stats right = Policy::minus(total, left);
          if (Policy::count(left) >= min_leaf && Policy::count(right) >= min_leaf) {
            const double g = Policy::gain(total, left, right);
            if (g > best.gain + kMinGain) {
              const double lo = vals[static_cast<std::size_t>(prev)];
              const double hi = vals[r];
              double t = 0.5 * (lo + hi);
              if (!(t < hi)) t = lo;
              best = {static_cast<std::int32_t>(f), static_cast<std::uint32_t>(prev), t, g};
            }
          }
        }
        left.merge(bucket);
        prev = r;
      };

      if (k <= 2 * n_node) {
        hist_.assign(k, Stats{});
        present_.assign(k, 0);
        for (std::size_t q = begin; q < end; ++q) {
          const auto r = rows_[q];
          policy_.add(hist_[rk[r]], r);
          present_[rk[r]] = 1;
        }
        for (std::uint32_t r = 0; r < k; ++r) {
          if (present_[r]) visit(r, hist_[r]);
        }
      } else {
        sorted_.assign(rows_.begin() + static_cast<std::ptrdiff_t>(begin), rows_.begin() + static_cast<std::ptrdiff_t>(end));
        std::sort(sorted_.begin(), sorted_.end(), [&](std::uint32_t l, std::uint32_t r) {
          return rk[l] != rk[r] ? rk[l] < rk[r] : l < r;
        });
        std::size_t q = 0;
        while (q < sorted_.size()) {
          const auto r = rk[sorted_[q]];
          Stats bucket;
          while (q < sorted_.size() && rk[sorted_[q]] == r) policy_.add(bucket, sorted_[q++]);
          visit(r, bucket);
        }
      }
    }
    return best;
  }

  const ColumnRanks& cols_;
  Policy policy_;
  TreeParams params_;
  Rng rng_;
  std::size_t try_count_ = 1;
  std::vector<std::size_t> perm_;
  std::vector<std::uint32_t> rows_;
  std::vector<std::uint32_t> sorted_;
  std::vector<Stats> hist_;
  std::vector<std::uint8_t> present_;
  std::vector<TreeNode> nodes_;
  std::vector<std::int32_t>* leaf_of_row_ = nullptr;
};

}  // namespace

DecisionTree grow_gini_tree(const ColumnRanks& cols, std::span<const std::uint8_t> y,
                            std::span<const std::uint32_t> weights, const TreeParams& params) {
  if (y.size() != cols.rows() || weights.size() != cols.rows()) throw ShapeError("label/weight length mismatch");
  std::vector<std::uint32_t> rows;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0) rows.push_back(static_cast<std::uint32_t>(i));
  }
  Grower<ClassStats, GiniPolicy> grower(cols, GiniPolicy{y, weights}, params);
  return grower.grow(std::move(rows), nullptr);
}

DecisionTree grow_regression_tree(const ColumnRanks& cols, std::span<const double> target, const TreeParams& params,
                                  std::vector<std::int32_t>* leaf_of_row) {
  if (target.size() != cols.rows()) throw ShapeError("target length mismatch");
  std::vector<std::uint32_t> rows(target.size());
  std::iota(rows.begin(), rows.end(), std::uint32_t{0});
  Grower<RegStats, SsePolicy> grower(cols, SsePolicy{target}, params);
  return grower.grow(std::move(rows), leaf_of_row);
}

}  // namespace cafp
