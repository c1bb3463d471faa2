#pragma once

// Session-level user environment. Each request the simulator draws candidate
// items, emits noisy multi-task scores for them, ranks them with the agent's
// fusion weights, samples the user's feedback on the top item, and decides
// whether the user leaves.
//
// Hidden dynamics: a Gaussian user latent drives per-task affinities through
// fixed task-mixing matrices. Consuming an item adds per-task fatigue that
// (a) lowers later realized affinities and (b) raises the leave probability,
// so maximizing instant reward is not optimal over a session.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mtf/domain.hpp"
#include "mtf/policy.hpp"
#include "mtf/rng.hpp"

namespace mtf {

struct SimConfig {
  int profile_dim = 8;
  int tasks = 4;           // k
  int feedback_dim = 6;    // m, fixed layout, see FeedbackVector
  int candidates = 20;     // c
  int max_session_length = 25;  // T
  int latent_dim = 8;      // h

  double history_decay = 0.95;  // ~20-interaction window

  double fatigue_strength = 0.2;
  double fatigue_decay = 0.8;
  double fatigue_threshold = 0.5;  // affinity above this accrues fatigue
  Vec fatigue_task_weights;  // per task, default (1, 0.5, 0, 0)
  double satiation = 0.5;     // affinity lost per unit of task fatigue

  double leave_bias = -2.0;         // b0
  double leave_satisfaction = 0.8;  // b1
  double leave_fatigue = 0.6;       // b2

  double affinity_scale = 2.0;
  Vec task_offsets;          // per task, default 0
  double score_noise = 0.3;  // noise of the synthetic task-score model
  double profile_noise = 0.1;

  double play_time_scale = 2.0;
  double play_time_sigma = 0.5;
  double play_time_cap = 4.0;
  double integrity_noise = 0.3;
  double like_offset = -1.0;
  double share_offset = -3.0;
  double comment_offset = -2.5;
  double exit_offset = -1.0;

  double smoothing_bias = 0.1;  // beta per task
  double action_lo = 0.01;
  double action_hi = 2.0;
  RewardWeights reward_weights = RewardWeights::defaults();

  std::uint64_t seed = 2022;  // world seed: projections and task mixing

  int history_dim() const { return 2 * feedback_dim + 3 * tasks; }
  int state_dim() const { return profile_dim + history_dim(); }
  SimConfig& fill_defaults();
  void validate() const;

  // Vector fields are comma-separated. from_map starts from the defaults and
  // rejects unknown keys.
  std::map<std::string, std::string> to_map() const;
  static SimConfig from_map(const std::map<std::string, std::string>& values);
};

struct SessionState {
  Vec latent;   // hidden user latent
  UserState visible;
  Vec fatigue;  // per task, >= 0
  int step = 0;
  bool done = false;

  // Current request. `affinity` is hidden ground truth; `scores` is what the
  // ranker sees.
  std::vector<Vec> affinity;
  std::vector<TaskScores> scores;

  Rng rng;
};

struct StepResult {
  FeedbackVector feedback;
  double reward = 0.0;
  std::size_t chosen = 0;
  bool done = false;
  SessionState next;
};

using SessionPolicy = std::function<FusionAction(const SessionState&, Rng&)>;

SessionPolicy visible_policy(const Policy& policy);

class Simulator {
 public:
  explicit Simulator(SimConfig config);

  const SimConfig& config() const { return config_; }
  int state_dim() const { return config_.state_dim(); }
  int action_dim() const { return config_.tasks; }
  ActionBounds bounds() const { return bounds_; }
  SmoothingBias smoothing() const { return beta_; }

  SessionState reset(std::uint64_t session_seed) const;
  const std::vector<TaskScores>& candidates(const SessionState& state) const;
  StepResult step(const SessionState& state, const FusionAction& action) const;

  // Expected instant reward of the item `action` would select, given the
  // current fatigue. Integrity uses its noise-free mean.
  double expected_reward(const SessionState& state, const FusionAction& action) const;

  // Largest reward a single step can produce.
  double max_step_reward() const;

  // Mean over sessions of sum_t gamma^t r_t. Session i uses
  // derive_seed(seed, i) for the user and derive_seed(~seed, i) for the policy.
  double mc_value(const SessionPolicy& policy, int sessions, std::uint64_t seed, double gamma) const;
  double mc_value(const Policy& policy, int sessions, std::uint64_t seed, double gamma) const;

  struct Rollout {
    std::vector<double> rewards;
    std::vector<FusionAction> actions;
    std::vector<Vec> states;
  };
  Rollout rollout(const SessionPolicy& policy, std::uint64_t session_seed, std::uint64_t policy_seed) const;

 private:
  void draw_candidates(SessionState& s) const;

  SimConfig config_;
  ActionBounds bounds_;
  SmoothingBias beta_;
  Eigen::MatrixXd profile_projection_;      // profile_dim x latent_dim
  std::vector<Eigen::MatrixXd> task_mixing_;  // per task, latent_dim x latent_dim
};

// Myopic baseline: argmax of expected instant reward over the grid
// {-1, -0.5, 0, 0.5, 1}^k, ties to the first grid point.
SessionPolicy greedy_policy(const Simulator& sim, int grid_points = 5);

}  // namespace mtf
