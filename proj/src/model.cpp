#include "cafp/model.hpp"

#include <cmath>
#include <sstream>

#include "cafp/ensemble.hpp"
#include "cafp/errors.hpp"
#include "cafp/logistic.hpp"

namespace cafp {

namespace {
constexpr const char* kModelFormat = "cafp.model";
constexpr int kModelVersion = 1;
}  // namespace

double sigmoid(double z) noexcept {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void ProbClassifier::check_input(std::size_t dim, std::uint8_t a) const {
  if (dim != n_features()) {
    throw ShapeError("expected " + std::to_string(n_features()) + " features, got " + std::to_string(dim));
  }
  if (a > 1) throw ShapeError("protected attribute must be 0 or 1");
}

void ProbClassifier::check_batch(const Matrix& X, std::size_t n_out) const {
  if (X.cols() != n_features()) {
    throw ShapeError("expected " + std::to_string(n_features()) + " feature columns, got " +
                     std::to_string(X.cols()));
  }
  if (n_out != X.rows()) throw ShapeError("output length does not match row count");
}

void ProbClassifier::predict_batch(const Matrix& X, std::span<const std::uint8_t> a, std::span<double> out) const {
  check_batch(X, out.size());
  if (a.size() != X.rows()) throw ShapeError("protected attribute length does not match row count");
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = predict_proba(X.row(i), a[i]);
}

void ProbClassifier::predict_batch(const Matrix& X, std::uint8_t a, std::span<double> out) const {
  check_batch(X, out.size());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = predict_proba(X.row(i), a);
}

std::vector<double> predict_all(const ProbClassifier& model, const Matrix& X, std::span<const std::uint8_t> a) {
  std::vector<double> out(X.rows());
  model.predict_batch(X, a, out);
  return out;
}

std::vector<double> predict_all(const ProbClassifier& model, const Matrix& X, std::uint8_t a) {
  std::vector<double> out(X.rows());
  model.predict_batch(X, a, out);
  return out;
}

Json save_model(const ProbClassifier& model, const std::vector<std::string>& feature_names,
                const std::string& schema_hash) {
  return Json{{"format", kModelFormat},
              {"version", kModelVersion},
              {"kind", model.kind()},
              {"feature_names", feature_names},
              {"schema_hash", schema_hash},
              {"model", model.to_json()}};
}

std::unique_ptr<ProbClassifier> load_model(const Json& envelope) {
  try {
    if (envelope.at("format").get<std::string>() != kModelFormat) throw ParseError("not a cafp model document");
    const int version = envelope.at("version").get<int>();
    if (version != kModelVersion) throw ParseError("unsupported model version " + std::to_string(version));
    const auto kind = envelope.at("kind").get<std::string>();
    const auto& body = envelope.at("model");
    if (kind == "logistic") return std::make_unique<LogisticModel>(LogisticModel::from_json(body));
    if (kind == "forest") return std::make_unique<ForestModel>(ForestModel::from_json(body));
    if (kind == "gbt") return std::make_unique<GbtModel>(GbtModel::from_json(body));
    throw ParseError("unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model document: ") + e.what());
  }
}

std::string model_id(const ProbClassifier& model) {
  const auto text = model.to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << model.kind() << '-' << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace cafp
