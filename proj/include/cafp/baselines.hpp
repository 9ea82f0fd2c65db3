#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

namespace cafp {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Equalized-odds derived predictor

// Per-group probabilities of emitting 1 given a base decision of 1 (p2p) or 0
// (n2p). The identity mixer has p2p = 1, n2p = 0.
struct EqOddsMixer {
  std::array<double, 2> p2p{1.0, 1.0};
  std::array<double, 2> n2p{0.0, 0.0};
  double threshold = 0.5;
  std::uint64_t seed = 0;
  // Shared operating point reached on the fitting data and its expected error.
  double target_tpr = 0.0;
  double target_fpr = 0.0;
  double expected_error = 0.0;

  [[nodiscard]] Json to_json() const;
  static EqOddsMixer from_json(const Json& j);
};

struct EqOddsOptions {
  double threshold = 0.5;
  double coarse_step = 0.01;
  double fine_step = 0.001;
};

// Picks a common (TPR, FPR) target reachable by both groups that minimizes
// the expected 0/1 error of the randomized decisions, then solves each
// group's two mixing rates exactly. Targets are searched on a coarse grid,
// refined around the best point, and the groups' own base operating points
// are always candidates. Equal errors resolve toward the identity mixer.
// Throws FitError when a group has no positive or no negative labels.
EqOddsMixer fit_eqodds(std::span<const double> val_scores, std::span<const std::uint8_t> val_a,
                       std::span<const std::uint8_t> val_y, std::uint64_t seed, const EqOddsOptions& opts = {});

// Randomized decisions. Row i draws its uniform from derive_seed(seed, i), so
// the output does not depend on evaluation order.
std::vector<std::uint8_t> apply_eqodds(const EqOddsMixer& mixer, std::span<const double> scores,
                                       std::span<const std::uint8_t> a, std::uint64_t seed);
inline std::vector<std::uint8_t> apply_eqodds(const EqOddsMixer& mixer, std::span<const double> scores,
                                              std::span<const std::uint8_t> a) {
  return apply_eqodds(mixer, scores, a, mixer.seed);
}

// Expected error of the mixed decisions given per-group base rates; exposed
// for tests and diagnostics.
struct GroupBaseRates {
  double tpr = 0.0;
  double fpr = 0.0;
  double positives = 0.0;  // label counts
  double negatives = 0.0;
};
std::array<GroupBaseRates, 2> eqodds_base_rates(std::span<const double> scores, std::span<const std::uint8_t> a,
                                                std::span<const std::uint8_t> y, double threshold);

// ---------------------------------------------------------------------------
// Reject option classification

struct RejectOptionRule {
  double theta = 0.1;
  std::uint8_t favored_group = 0;

  [[nodiscard]] Json to_json() const;
};

// Outside the band |s - 0.5| <= theta decisions are s >= 0.5; inside it the
// favored group gets 1 and the other group 0. theta = 0 means no band.
std::vector<std::uint8_t> apply_reject_option(const RejectOptionRule& rule, std::span<const double> scores,
                                              std::span<const std::uint8_t> a);

// Grid 0, 0.01, ..., 0.5.
std::vector<double> default_theta_grid();

// Chooses the theta with the smallest |DPD| whose accuracy is at most
// max_accuracy_loss below that of theta = 0. Ties go to the smallest theta.
RejectOptionRule select_theta(std::span<const double> val_scores, std::span<const std::uint8_t> val_a,
                              std::span<const std::uint8_t> val_y, std::span<const double> grid,
                              double max_accuracy_loss = 0.10, std::uint8_t favored_group = 0);

}  // namespace cafp
