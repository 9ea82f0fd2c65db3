#include "cafp/logistic.hpp"

#include <algorithm>
#include <cmath>

#include "cafp/errors.hpp"

namespace cafp {

namespace {


// Four independent partial sums break the add dependency chain; the fixed
// summation order keeps results bit-identical across runs.
double dot(std::span<const double> x, const double* w) noexcept {
  const std::size_t n = x.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += x[j] * w[j];
    s1 += x[j + 1] * w[j + 1];
    s2 += x[j + 2] * w[j + 2];
    s3 += x[j + 3] * w[j + 3];
  }
  for (; j < n; ++j) s0 += x[j] * w[j];
  return (s0 + s1) + (s2 + s3);
}

// Nonzero entries of X by row. One-hot columns dominate the tabular inputs,
// so skipping exact zeros makes each gradient pass several times cheaper.
struct SparseRows {
  std::vector<std::size_t> start;
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  explicit SparseRows(const Matrix& X) {
    start.reserve(X.rows() + 1);
    start.push_back(0);
    for (std::size_t i = 0; i < X.rows(); ++i) {
      const auto x = X.row(i);
      for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j] != 0.0) {
          col.push_back(static_cast<std::uint32_t>(j));
          val.push_back(x[j]);
        }
      }
      start.push_back(col.size());
    }
  }
};

// One pass over the data: returns the penalized mean loss at (w, b) and writes
// its gradient into (gw, gb).
double evaluate(const Dataset& ds, const SparseRows& sx, std::span<const double> w, double b, double l2,
                std::vector<double>& gw, double& gb) {
  const std::size_t d = ds.d();
  const double wa = w[d];
  gw.assign(d + 1, 0.0);
  gb = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const std::size_t lo = sx.start[i];
    const std::size_t hi = sx.start[i + 1];
    double z = b + wa * ds.a[i];
    for (std::size_t k = lo; k < hi; ++k) z += sx.val[k] * w[sx.col[k]];
    const double e = std::exp(-std::abs(z));
    total += (z > 0.0 ? z : 0.0) + std::log1p(e) - (ds.y[i] ? z : 0.0);
    const double p = z >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    const double r = p - ds.y[i];
    for (std::size_t k = lo; k < hi; ++k) gw[sx.col[k]] += r * sx.val[k];
    gw[d] += r * ds.a[i];
    gb += r;
  }
  const double inv_n = 1.0 / static_cast<double>(ds.n());
  double penalty = 0.0;
  for (std::size_t j = 0; j <= d; ++j) {
    gw[j] = gw[j] * inv_n + l2 * w[j];
    penalty += w[j] * w[j];
  }
  gb *= inv_n;
  return total * inv_n + 0.5 * l2 * penalty;
}

void check_params(const Dataset& ds, std::span<const double> w) {
  if (w.size() != ds.d() + 1) {
    throw ShapeError("expected " + std::to_string(ds.d() + 1) + " weights, got " + std::to_string(w.size()));
  }
  if (ds.n() == 0) throw EmptyDatasetError("logistic loss on an empty dataset");
}

}  // namespace

LogisticModel::LogisticModel(std::vector<double> weights, double bias, TrainingMeta meta)
    : weights_(std::move(weights)), bias_(bias), meta_(std::move(meta)) {
  if (weights_.empty()) throw ShapeError("logistic model needs at least the protected-attribute weight");
  for (double w : weights_) {
    if (!std::isfinite(w)) throw DivergenceError("non-finite logistic weight");
  }
  if (!std::isfinite(bias_)) throw DivergenceError("non-finite logistic bias");
}

double LogisticModel::logit(std::span<const double> x, std::uint8_t a) const {
  check_input(x.size(), a);
  return bias_ + dot(x, weights_.data()) + weights_.back() * a;
}

double LogisticModel::predict_proba(std::span<const double> x, std::uint8_t a) const { return sigmoid(logit(x, a)); }

void LogisticModel::predict_batch(const Matrix& X, std::span<const std::uint8_t> a, std::span<double> out) const {
  check_batch(X, out.size());
  if (a.size() != X.rows()) throw ShapeError("protected attribute length does not match row count");
  const double wa = weights_.back();
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = sigmoid(bias_ + dot(X.row(i), weights_.data()) + wa * a[i]);
}

void LogisticModel::predict_batch(const Matrix& X, std::uint8_t a, std::span<double> out) const {
  check_batch(X, out.size());
  if (a > 1) throw ShapeError("protected attribute must be 0 or 1");
  const double wa = weights_.back() * a;
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = sigmoid(bias_ + dot(X.row(i), weights_.data()) + wa);
}

Json LogisticModel::to_json() const {
  return Json{{"weights", weights_},
              {"bias", bias_},
              {"training", {{"iterations", meta_.iterations}, {"final_loss", meta_.final_loss}}}};
}

LogisticModel LogisticModel::from_json(const Json& j) {
  TrainingMeta meta;
  if (j.contains("training")) {
    meta.iterations = j.at("training").value("iterations", 0);
    meta.final_loss = j.at("training").value("final_loss", 0.0);
  }
  return LogisticModel(j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>(), meta);
}

double logistic_loss(const Dataset& ds, std::span<const double> weights, double bias, double l2_penalty) {
  check_params(ds, weights);
  std::vector<double> gw;
  double gb = 0.0;
  return evaluate(ds, SparseRows(ds.X), weights, bias, l2_penalty, gw, gb);
}

std::pair<std::vector<double>, double> logistic_gradient(const Dataset& ds, std::span<const double> weights,
                                                         double bias, double l2_penalty) {
  check_params(ds, weights);
  std::vector<double> gw;
  double gb = 0.0;
  evaluate(ds, SparseRows(ds.X), weights, bias, l2_penalty, gw, gb);
  return {std::move(gw), gb};
}

LogisticModel train_logistic(const Dataset& train, const LogisticConfig& cfg) {
  if (train.n() == 0) throw EmptyDatasetError("cannot train on an empty dataset");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  const std::size_t d = train.d();
  const SparseRows sx(train.X);

  std::vector<double> w(d + 1, 0.0);
  double b = 0.0;
  std::vector<double> gw;
  double gb = 0.0;
  double loss = evaluate(train, sx, w, b, cfg.l2_penalty, gw, gb);

  TrainingMeta meta;
  meta.loss_history.push_back(loss);
  double lr = cfg.learning_rate;
  std::vector<double> trial_w(d + 1);
  std::vector<double> trial_gw;
  double trial_gb = 0.0;

  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    double gmax = std::abs(gb);
    for (double g : gw) gmax = std::max(gmax, std::abs(g));
    if (gmax < cfg.tolerance) break;

    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t j = 0; j <= d; ++j) trial_w[j] = w[j] - lr * gw[j];
      const double trial_b = b - lr * gb;
      const double trial_loss = evaluate(train, sx, trial_w, trial_b, cfg.l2_penalty, trial_gw, trial_gb);
      if (!std::isfinite(trial_loss)) {
        throw DivergenceError("logistic loss became non-finite at iteration " + std::to_string(it));
      }
      if (trial_loss <= loss) {
        w.swap(trial_w);
        b = trial_b;
        gw.swap(trial_gw);
        gb = trial_gb;
        loss = trial_loss;
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;  // step size underflowed; we are at a numerical minimum
    meta.loss_history.push_back(loss);
  }
  meta.iterations = it;
  meta.final_loss = loss;
  meta.final_learning_rate = lr;
  return LogisticModel(std::move(w), b, std::move(meta));
}

double logistic_gradient_check(const Dataset& toy, std::span<const double> weights, double bias, double l2_penalty,
                               double step) {
  const auto [gw, gb] = logistic_gradient(toy, weights, bias, l2_penalty);
  std::vector<double> w(weights.begin(), weights.end());
  auto rel = [](double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1e-4, std::abs(analytic) + std::abs(numeric));
  };
  double worst = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double orig = w[j];
    w[j] = orig + step;
    const double up = logistic_loss(toy, w, bias, l2_penalty);
    w[j] = orig - step;
    const double down = logistic_loss(toy, w, bias, l2_penalty);
    w[j] = orig;
    worst = std::max(worst, rel(gw[j], (up - down) / (2.0 * step)));
  }
  const double up = logistic_loss(toy, w, bias + step, l2_penalty);
  const double down = logistic_loss(toy, w, bias - step, l2_penalty);
  worst = std::max(worst, rel(gb, (up - down) / (2.0 * step)));
  return worst;
}

}  // namespace cafp
