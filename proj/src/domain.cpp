#include "mtf/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mtf {

Vec UserState::flatten() const {
  Vec s(profile.size() + history.size());
  s << profile, history;
  return s;
}

bool FeedbackVector::valid() const {
  if (v.size() < 2 || !v.allFinite()) return false;
  if (v(play_time) < 0.0) return false;
  if (v(integrity) < 0.0 || v(integrity) > 1.0) return false;
  for (Eigen::Index i = 2; i < v.size(); ++i)
    if (v(i) != 0.0 && v(i) != 1.0) return false;
  return true;
}

RewardWeights RewardWeights::defaults() {
  RewardWeights r;
  r.w.resize(FeedbackVector::default_size);
  r.w << 1.0, 0.5, 1.0, 1.0, 1.0, -0.5;
  return r;
}

void RewardWeights::validate() const {
  if (w.size() == 0 || !w.allFinite()) throw std::invalid_argument("reward weights must be finite and non-empty");
  if ((w.array() == 0.0).all()) throw std::invalid_argument("reward weights need at least one nonzero entry");
}

ActionBounds ActionBounds::uniform(int k, double lo, double hi) {
  ActionBounds b{Vec::Constant(k, lo), Vec::Constant(k, hi)};
  b.validate();
  return b;
}

void ActionBounds::validate() const {
  if (lo.size() != hi.size() || lo.size() == 0) throw std::invalid_argument("action bounds: length mismatch");
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!(lo(i) < hi(i))) {
      throw std::invalid_argument("action bounds: lo >= hi in dimension " + std::to_string(i));
    }
  }
}

double fuse(const TaskScores& scores, const Vec& alpha, const SmoothingBias& beta) {
  const Eigen::Index k = scores.o.size();
  if (alpha.size() != k || beta.beta.size() != k) {
    throw std::invalid_argument("fuse: expected " + std::to_string(k) + " weights and biases");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double arg = scores.o(i) + beta.beta(i);
    if (!(arg > 0.0)) throw std::invalid_argument("fuse: invalid score, o + beta <= 0 in task " + std::to_string(i));
    total += alpha(i) * std::log(arg);
  }
  return total;
}

Ranking rank(const std::vector<TaskScores>& candidates, const Vec& alpha, const SmoothingBias& beta) {
  if (candidates.empty()) throw std::invalid_argument("rank: empty candidate list");
  std::vector<double> score(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) score[i] = fuse(candidates[i], alpha, beta);
  Ranking r;
  r.order.resize(candidates.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  r.best = r.order.front();
  return r;
}

double reward(const FeedbackVector& feedback, const RewardWeights& weights) {
  if (feedback.v.size() != weights.w.size()) {
    throw std::invalid_argument("reward: feedback has " + std::to_string(feedback.v.size()) + " entries, weights " +
                                std::to_string(weights.w.size()));
  }
  return weights.w.dot(feedback.v);
}

FusionAction normalize_action(const Vec& raw, const ActionBounds& bounds) {
  bounds.validate();
  if (raw.size() != bounds.size()) throw std::invalid_argument("normalize_action: dimension mismatch");
  FusionAction a;
  a.alpha.resize(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    const double x = std::clamp(raw(i), bounds.lo(i), bounds.hi(i));
    a.alpha(i) = std::clamp(2.0 * (x - bounds.lo(i)) / (bounds.hi(i) - bounds.lo(i)) - 1.0, -1.0, 1.0);
  }
  return a;
}

Vec denormalize_action(const FusionAction& action, const ActionBounds& bounds) {
  bounds.validate();
  if (action.alpha.size() != bounds.size()) throw std::invalid_argument("denormalize_action: dimension mismatch");
  Vec raw(action.alpha.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    const double a = std::clamp(action.alpha(i), -1.0, 1.0);
    raw(i) = std::clamp(bounds.lo(i) + 0.5 * (a + 1.0) * (bounds.hi(i) - bounds.lo(i)), bounds.lo(i), bounds.hi(i));
  }
  return raw;
}

Vec clamp_unit(const Vec& a) { return a.cwiseMax(-1.0).cwiseMin(1.0); }

}  // namespace mtf
