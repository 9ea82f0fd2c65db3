#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cafp/data.hpp"
#include "cafp/model.hpp"

namespace cafp {

struct LogisticConfig {
  double learning_rate = 0.1;  // halved whenever a step would increase the loss
  double l2_penalty = 1e-4;
  int max_iters = 2000;
  double tolerance = 1e-6;     // on the largest gradient component
  std::uint64_t seed = 0;      // weights start at zero, so this does not change the fit
};

struct TrainingMeta {
  int iterations = 0;
  double final_loss = 0.0;
  double final_learning_rate = 0.0;
  std::vector<double> loss_history;  // loss after each accepted step, starting with the initial loss
};

// Logistic regression on [x, a]: the last weight is the protected-attribute
// coefficient.
class LogisticModel final : public ProbClassifier {
 public:
  LogisticModel() = default;
  LogisticModel(std::vector<double> weights, double bias, TrainingMeta meta = {});

  [[nodiscard]] std::size_t n_features() const override { return weights_.empty() ? 0 : weights_.size() - 1; }
  [[nodiscard]] double predict_proba(std::span<const double> x, std::uint8_t a) const override;
  void predict_batch(const Matrix& X, std::span<const std::uint8_t> a, std::span<double> out) const override;
  void predict_batch(const Matrix& X, std::uint8_t a, std::span<double> out) const override;
  [[nodiscard]] std::string kind() const override { return "logistic"; }
  [[nodiscard]] Json to_json() const override;
  static LogisticModel from_json(const Json& j);

  [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }
  [[nodiscard]] double bias() const noexcept { return bias_; }
  [[nodiscard]] double protected_coefficient() const noexcept { return weights_.back(); }
  [[nodiscard]] const TrainingMeta& meta() const noexcept { return meta_; }

  [[nodiscard]] double logit(std::span<const double> x, std::uint8_t a) const;

 private:
  std::vector<double> weights_;  // d feature weights, then the protected-attribute weight
  double bias_ = 0.0;
  TrainingMeta meta_;
};

// Mean negative log-likelihood plus (l2/2)*||w||^2 (bias unpenalized).
double logistic_loss(const Dataset& ds, std::span<const double> weights, double bias, double l2_penalty);

// Gradient of logistic_loss; returns (dw, db).
std::pair<std::vector<double>, double> logistic_gradient(const Dataset& ds, std::span<const double> weights,
                                                         double bias, double l2_penalty);

// Full-batch gradient descent with backtracking. Throws DivergenceError if the
// loss becomes non-finite.
LogisticModel train_logistic(const Dataset& train, const LogisticConfig& cfg = {});

// Max relative error between logistic_gradient and central finite differences
// of logistic_loss at the given parameters. Relative error per component is
// |g - fd| / max(1e-4, |g| + |fd|).
double logistic_gradient_check(const Dataset& toy, std::span<const double> weights, double bias,
                               double l2_penalty, double step = 1e-5);

}  // namespace cafp
