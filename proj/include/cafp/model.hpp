#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cafp/matrix.hpp"

namespace cafp {

using Json = nlohmann::json;

// A trained probabilistic classifier f(x, a) -> [0, 1].
//
// The protected attribute is a separate argument; implementations treat it as
// one extra input column appended after the features, so a counterfactual
// query only changes that coordinate. Trained models are immutable and safe to
// share across threads.
class ProbClassifier {
 public:
  virtual ~ProbClassifier() = default;

  // Feature dimension expected in x (the protected attribute is not counted).
  [[nodiscard]] virtual std::size_t n_features() const = 0;

  [[nodiscard]] virtual double predict_proba(std::span<const double> x, std::uint8_t a) const = 0;

  // Row-wise predictions with a per-row protected attribute. The default loops
  // over predict_proba; models override when a batched path is cheaper.
  virtual void predict_batch(const Matrix& X, std::span<const std::uint8_t> a, std::span<double> out) const;

  // Row-wise predictions with the same protected value for every row.
  virtual void predict_batch(const Matrix& X, std::uint8_t a, std::span<double> out) const;

  [[nodiscard]] virtual std::string kind() const = 0;

  // Model-specific payload; see save_model for the versioned envelope.
  [[nodiscard]] virtual Json to_json() const = 0;

 protected:
  void check_input(std::size_t dim, std::uint8_t a) const;
  void check_batch(const Matrix& X, std::size_t n_out) const;
};

std::vector<double> predict_all(const ProbClassifier& model, const Matrix& X, std::span<const std::uint8_t> a);
std::vector<double> predict_all(const ProbClassifier& model, const Matrix& X, std::uint8_t a);

// Versioned envelope: {format, version, kind, feature_names, schema_hash, model}.
Json save_model(const ProbClassifier& model, const std::vector<std::string>& feature_names,
                const std::string& schema_hash);
std::unique_ptr<ProbClassifier> load_model(const Json& envelope);

// Short stable identifier: kind plus a hash of the serialized parameters.
std::string model_id(const ProbClassifier& model);

// Numerically stable logistic function.
double sigmoid(double z) noexcept;

}  // namespace cafp
