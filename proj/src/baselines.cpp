#include "cafp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "cafp/errors.hpp"
#include "cafp/metrics.hpp"
#include "cafp/random.hpp"

namespace cafp {

namespace {

constexpr double kTie = 1e-12;
constexpr double kFeasEps = 1e-12;

struct Params {
  double p2p = 1.0;
  double n2p = 0.0;
};

// Mixing rates that move a group with base rates (tpr, fpr) to the target
// (t, f), or nullopt if the target is outside the group's reachable set.
std::optional<Params> solve_group(const GroupBaseRates& g, double t, double f) {
  const double det = g.tpr - g.fpr;
  Params p;
  if (std::abs(det) < kFeasEps) {
    // Uninformative base decisions: only the diagonal is reachable.
    // Among the rates giving p2p * r + n2p * (1 - r) = t, take the one nearest
    // the identity (p2p = 1, n2p = 0).
    if (std::abs(t - f) > kFeasEps) return std::nullopt;
    const double r = g.tpr;
    if (t >= r && r < 1.0) {
      p.p2p = 1.0;
      p.n2p = (t - r) / (1.0 - r);
    } else {
      p.p2p = r > 0.0 ? t / r : 1.0;
      p.n2p = r > 0.0 ? 0.0 : t;
    }
  } else {
    // p2p * tpr + n2p * (1 - tpr) = t ; p2p * fpr + n2p * (1 - fpr) = f
    p.p2p = (t * (1.0 - g.fpr) - f * (1.0 - g.tpr)) / det;
    p.n2p = (f * g.tpr - t * g.fpr) / det;
  }
  if (p.p2p < -kFeasEps || p.p2p > 1.0 + kFeasEps || p.n2p < -kFeasEps || p.n2p > 1.0 + kFeasEps) return std::nullopt;
  p.p2p = std::clamp(p.p2p, 0.0, 1.0);
  p.n2p = std::clamp(p.n2p, 0.0, 1.0);
  return p;
}

struct Candidate {
  double t = 0.0;
  double f = 0.0;
  double error = 0.0;
  double identity_distance = 0.0;
  Params params[2];
};

}  // namespace

std::array<GroupBaseRates, 2> eqodds_base_rates(std::span<const double> scores, std::span<const std::uint8_t> a,
                                                std::span<const std::uint8_t> y, double threshold) {
  if (scores.size() != a.size() || scores.size() != y.size()) throw ShapeError("eq-odds inputs have different lengths");
  double tp[2] = {0, 0}, fp[2] = {0, 0}, pos[2] = {0, 0}, neg[2] = {0, 0};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int g = a[i] ? 1 : 0;
    const bool pred = scores[i] >= threshold;
    if (y[i]) {
      pos[g] += 1;
      tp[g] += pred ? 1 : 0;
    } else {
      neg[g] += 1;
      fp[g] += pred ? 1 : 0;
    }
  }
  std::array<GroupBaseRates, 2> out;
  for (int g = 0; g < 2; ++g) {
    if (pos[g] == 0) throw FitError("eq-odds fit: group a=" + std::to_string(g) + " has no positive labels");
    if (neg[g] == 0) throw FitError("eq-odds fit: group a=" + std::to_string(g) + " has no negative labels");
    out[g] = {tp[g] / pos[g], fp[g] / neg[g], pos[g], neg[g]};
  }
  return out;
}

EqOddsMixer fit_eqodds(std::span<const double> val_scores, std::span<const std::uint8_t> val_a,
                       std::span<const std::uint8_t> val_y, std::uint64_t seed, const EqOddsOptions& opts) {
  if (!(opts.coarse_step > 0.0) || !(opts.fine_step > 0.0)) throw ConfigError("eq-odds grid steps must be positive");
  const auto base = eqodds_base_rates(val_scores, val_a, val_y, opts.threshold);
  const double n = base[0].positives + base[0].negatives + base[1].positives + base[1].negatives;
  const double pi1 = (base[0].positives + base[1].positives) / n;
  const double pi0 = 1.0 - pi1;

  std::optional<Candidate> best;
  auto consider = [&](double t, double f) {
    t = std::clamp(t, 0.0, 1.0);
    f = std::clamp(f, 0.0, 1.0);
    Candidate c{t, f, pi1 * (1.0 - t) + pi0 * f, 0.0, {}};
    for (int g = 0; g < 2; ++g) {
      const auto p = solve_group(base[g], t, f);
      if (!p) return;
      c.params[g] = *p;
      c.identity_distance += (1.0 - p->p2p) + p->n2p;
    }
    if (!best || c.error < best->error - kTie ||
        (c.error <= best->error + kTie && c.identity_distance < best->identity_distance - kTie)) {
      best = c;
    }
  };

  for (int g = 0; g < 2; ++g) consider(base[g].tpr, base[g].fpr);
  const auto coarse = static_cast<int>(std::llround(1.0 / opts.coarse_step));
  for (int i = 0; i <= coarse; ++i) {
    for (int j = 0; j <= coarse; ++j) consider(i * opts.coarse_step, j * opts.coarse_step);
  }
  if (!best) throw FitError("eq-odds fit: no common operating point is reachable by both groups");
  const double ct = best->t;
  const double cf = best->f;
  const auto fine = static_cast<int>(std::llround(opts.coarse_step / opts.fine_step));
  for (int i = -fine; i <= fine; ++i) {
    for (int j = -fine; j <= fine; ++j) consider(ct + i * opts.fine_step, cf + j * opts.fine_step);
  }

  EqOddsMixer m;
  for (int g = 0; g < 2; ++g) {
    m.p2p[g] = best->params[g].p2p;
    m.n2p[g] = best->params[g].n2p;
  }
  m.threshold = opts.threshold;
  m.seed = seed;
  m.target_tpr = best->t;
  m.target_fpr = best->f;
  m.expected_error = best->error;
  return m;
}

std::vector<std::uint8_t> apply_eqodds(const EqOddsMixer& mixer, std::span<const double> scores,
                                       std::span<const std::uint8_t> a, std::uint64_t seed) {
  if (scores.size() != a.size()) throw ShapeError("eq-odds inputs have different lengths");
  std::vector<std::uint8_t> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int g = a[i] ? 1 : 0;
    const double u = to_unit(derive_seed(seed, i));
    const double p = scores[i] >= mixer.threshold ? mixer.p2p[g] : mixer.n2p[g];
    out[i] = u < p ? 1 : 0;
  }
  return out;
}

Json EqOddsMixer::to_json() const {
  return Json{{"p2p", p2p}, {"n2p", n2p}, {"threshold", threshold}, {"seed", seed},
              {"target_tpr", target_tpr}, {"target_fpr", target_fpr}, {"expected_error", expected_error}};
}

EqOddsMixer EqOddsMixer::from_json(const Json& j) {
  EqOddsMixer m;
  m.p2p = j.at("p2p").get<std::array<double, 2>>();
  m.n2p = j.at("n2p").get<std::array<double, 2>>();
  m.threshold = j.value("threshold", 0.5);
  m.seed = j.value("seed", std::uint64_t{0});
  m.target_tpr = j.value("target_tpr", 0.0);
  m.target_fpr = j.value("target_fpr", 0.0);
  m.expected_error = j.value("expected_error", 0.0);
  for (int g = 0; g < 2; ++g) {
    if (!(m.p2p[g] >= 0.0 && m.p2p[g] <= 1.0 && m.n2p[g] >= 0.0 && m.n2p[g] <= 1.0)) {
      throw ParseError("eq-odds mixing rates must lie in [0,1]");
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Reject option

Json RejectOptionRule::to_json() const { return Json{{"theta", theta}, {"favored_group", favored_group}}; }

std::vector<std::uint8_t> apply_reject_option(const RejectOptionRule& rule, std::span<const double> scores,
                                              std::span<const std::uint8_t> a) {
  if (scores.size() != a.size()) throw ShapeError("reject-option inputs have different lengths");
  if (!(rule.theta >= 0.0 && rule.theta <= 0.5)) throw ConfigError("theta must lie in [0, 0.5]");
  std::vector<std::uint8_t> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool in_band = rule.theta > 0.0 && std::abs(scores[i] - 0.5) <= rule.theta;
    if (in_band) {
      out[i] = a[i] == rule.favored_group ? 1 : 0;
    } else {
      out[i] = scores[i] >= 0.5 ? 1 : 0;
    }
  }
  return out;
}

std::vector<double> default_theta_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 50; ++i) grid.push_back(i / 100.0);
  return grid;
}

RejectOptionRule select_theta(std::span<const double> val_scores, std::span<const std::uint8_t> val_a,
                              std::span<const std::uint8_t> val_y, std::span<const double> grid,
                              double max_accuracy_loss, std::uint8_t favored_group) {
  if (grid.empty()) throw ConfigError("theta grid is empty");
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() < 0.0 || sorted.back() > 0.5) throw ConfigError("theta grid values must lie in [0, 0.5]");

  const double base_acc = accuracy(apply_reject_option({0.0, favored_group}, val_scores, val_a), val_y);
  std::optional<RejectOptionRule> best;
  double best_dpd = 0.0;
  for (double theta : sorted) {
    const RejectOptionRule rule{theta, favored_group};
    const auto pred = apply_reject_option(rule, val_scores, val_a);
    if (base_acc - accuracy(pred, val_y) > max_accuracy_loss + kTie) continue;
    const double d = dpd(pred, val_a).abs_value;
    if (!best || d < best_dpd - kTie) {
      best = rule;
      best_dpd = d;
    }
  }
  // theta = 0 is always admissible, so the grid minimum is the fallback.
  return best.value_or(RejectOptionRule{sorted.front(), favored_group});
}

}  // namespace cafp
