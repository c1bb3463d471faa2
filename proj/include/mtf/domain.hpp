#pragma once

// MDP vocabulary for multi-task fusion: user states, fusion actions, task
// scores, user feedback, the log-weighted fusion score, and the reward.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace mtf {

using Vec = Eigen::VectorXd;

struct UserState {
  Vec profile;
  Vec history;

  Vec flatten() const;
  int size() const { return static_cast<int>(profile.size() + history.size()); }
};

// Predicted per-task probabilities from the upstream multi-task model.
struct TaskScores {
  Vec o;
};

// Fusion weights in the normalized action box [-1, 1]^k.
struct FusionAction {
  Vec alpha;
};

struct SmoothingBias {
  Vec beta;
};

// Feedback layout: play time (normalized seconds), play integrity in [0, 1],
// then binary flags: like, share, comment, fast exit.
struct FeedbackVector {
  Vec v;

  static constexpr int play_time = 0;
  static constexpr int integrity = 1;
  static constexpr int like = 2;
  static constexpr int share = 3;
  static constexpr int comment = 4;
  static constexpr int fast_exit = 5;
  static constexpr int default_size = 6;

  // play time >= 0, integrity in [0, 1], every later entry in {0, 1}.
  bool valid() const;
};

struct RewardWeights {
  Vec w;

  // play time 1.0, integrity 0.5, like/share/comment 1.0, fast exit -0.5.
  static RewardWeights defaults();
  void validate() const;
};

// Per-dimension truncation interval for raw fusion weights.
struct ActionBounds {
  Vec lo;
  Vec hi;

  static ActionBounds uniform(int k, double lo, double hi);
  int size() const { return static_cast<int>(lo.size()); }
  void validate() const;
};

struct Transition {
  Vec state;
  Vec action;
  double reward = 0.0;
  Vec next_state;
  bool done = false;
  std::uint64_t session_id = 0;
  int step = 0;

  bool operator==(const Transition&) const = default;
};

// sum_i alpha_i * log(o_i + beta_i). `alpha` holds effective (denormalized)
// weights. Throws std::invalid_argument on length mismatch or o_i + beta_i <= 0.
double fuse(const TaskScores& scores, const Vec& alpha, const SmoothingBias& beta);

struct Ranking {
  std::size_t best = 0;
  std::vector<std::size_t> order;  // descending fused score, ties by lower index
};

Ranking rank(const std::vector<TaskScores>& candidates, const Vec& alpha, const SmoothingBias& beta);

double reward(const FeedbackVector& feedback, const RewardWeights& weights);

// Clamp to [lo, hi] then map affinely onto [-1, 1].
FusionAction normalize_action(const Vec& raw, const ActionBounds& bounds);
// Inverse map from [-1, 1] back to [lo, hi]; inputs outside the box are clamped first.
Vec denormalize_action(const FusionAction& action, const ActionBounds& bounds);

Vec clamp_unit(const Vec& a);

}  // namespace mtf
