#include "mtf/simulator.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "mtf/text.hpp"

namespace mtf {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// E[min(cap, c * exp(sigma * Z))], Z standard normal.
double capped_lognormal_mean(double c, double sigma, double cap) {
  if (c <= 0.0) return 0.0;
  if (sigma <= 0.0) return std::min(cap, c);
  const double l = std::log(cap / c);
  return c * std::exp(0.5 * sigma * sigma) * normal_cdf((l - sigma * sigma) / sigma) + cap * (1.0 - normal_cdf(l / sigma));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("sim config: " + what);
}

using IntField = std::pair<const char*, int SimConfig::*>;
using DoubleField = std::pair<const char*, double SimConfig::*>;
using VecField = std::pair<const char*, Vec SimConfig::*>;

constexpr IntField int_fields[] = {
    {"profile_dim", &SimConfig::profile_dim},
    {"tasks", &SimConfig::tasks},
    {"feedback_dim", &SimConfig::feedback_dim},
    {"candidates", &SimConfig::candidates},
    {"max_session_length", &SimConfig::max_session_length},
    {"latent_dim", &SimConfig::latent_dim},
};

constexpr DoubleField double_fields[] = {
    {"history_decay", &SimConfig::history_decay},
    {"fatigue_strength", &SimConfig::fatigue_strength},
    {"fatigue_decay", &SimConfig::fatigue_decay},
    {"fatigue_threshold", &SimConfig::fatigue_threshold},
    {"satiation", &SimConfig::satiation},
    {"leave_bias", &SimConfig::leave_bias},
    {"leave_satisfaction", &SimConfig::leave_satisfaction},
    {"leave_fatigue", &SimConfig::leave_fatigue},
    {"affinity_scale", &SimConfig::affinity_scale},
    {"score_noise", &SimConfig::score_noise},
    {"profile_noise", &SimConfig::profile_noise},
    {"play_time_scale", &SimConfig::play_time_scale},
    {"play_time_sigma", &SimConfig::play_time_sigma},
    {"play_time_cap", &SimConfig::play_time_cap},
    {"integrity_noise", &SimConfig::integrity_noise},
    {"like_offset", &SimConfig::like_offset},
    {"share_offset", &SimConfig::share_offset},
    {"comment_offset", &SimConfig::comment_offset},
    {"exit_offset", &SimConfig::exit_offset},
    {"smoothing_bias", &SimConfig::smoothing_bias},
    {"action_lo", &SimConfig::action_lo},
    {"action_hi", &SimConfig::action_hi},
};

constexpr VecField vec_fields[] = {
    {"fatigue_task_weights", &SimConfig::fatigue_task_weights},
    {"task_offsets", &SimConfig::task_offsets},
};

std::string join(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    text::append_double(out, v(i));
  }
  return out;
}

Vec parse_vec(const std::string& key, const std::string& value) {
  const auto parts = text::split(value, ',');
  Vec v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto x = text::parse_double(parts[i]);
    require(x.has_value(), key + ": bad number list '" + value + "'");
    v(static_cast<Eigen::Index>(i)) = *x;
  }
  return v;
}

}  // namespace

SimConfig& SimConfig::fill_defaults() {
  if (fatigue_task_weights.size() == 0) {
    fatigue_task_weights = Vec::Zero(tasks);
    fatigue_task_weights(0) = 1.0;
    if (tasks > 1) fatigue_task_weights(1) = 0.5;
  }
  if (task_offsets.size() == 0) task_offsets = Vec::Zero(tasks);
  return *this;
}

void SimConfig::validate() const {
  require(profile_dim >= 1, "profile_dim must be >= 1");
  require(tasks >= 1, "tasks must be >= 1");
  require(feedback_dim == FeedbackVector::default_size, "feedback_dim must be 6 (play time, integrity, like, share, comment, fast exit)");
  require(candidates >= 2, "candidates must be >= 2");
  require(max_session_length >= 2, "max_session_length must be >= 2");
  require(latent_dim >= 1, "latent_dim must be >= 1");
  require(history_decay >= 0.0 && history_decay < 1.0, "history_decay must lie in [0, 1)");
  require(fatigue_strength >= 0.0, "fatigue_strength must be >= 0");
  require(fatigue_decay >= 0.0 && fatigue_decay < 1.0, "fatigue_decay must lie in [0, 1)");
  require(fatigue_task_weights.size() == tasks && (fatigue_task_weights.array() >= 0.0).all(),
          "fatigue_task_weights needs one non-negative entry per task");
  require(task_offsets.size() == tasks, "task_offsets needs one entry per task");
  require(satiation >= 0.0 && affinity_scale >= 0.0, "scales must be >= 0");
  require(score_noise >= 0.0 && profile_noise >= 0.0 && integrity_noise >= 0.0 && play_time_sigma >= 0.0,
          "noise scales must be >= 0");
  require(play_time_scale >= 0.0 && play_time_cap > 0.0, "play time scale must be >= 0 and cap > 0");
  require(smoothing_bias >= 0.0, "smoothing_bias must be >= 0");
  require(action_lo < action_hi, "action_lo must be < action_hi");
  require(reward_weights.w.size() == feedback_dim, "reward weights need one entry per feedback dimension");
  reward_weights.validate();
}

std::map<std::string, std::string> SimConfig::to_map() const {
  SimConfig c = *this;
  c.fill_defaults();
  std::map<std::string, std::string> out;
  for (const auto& [name, field] : int_fields) out[name] = std::to_string(c.*field);
  for (const auto& [name, field] : double_fields) out[name] = text::format_double(c.*field);
  for (const auto& [name, field] : vec_fields) out[name] = join(c.*field);
  out["reward_weights"] = join(c.reward_weights.w);
  out["seed"] = std::to_string(c.seed);
  return out;
}

SimConfig SimConfig::from_map(const std::map<std::string, std::string>& values) {
  SimConfig c;
  for (const auto& [key, value] : values) {
    bool found = false;
    for (const auto& [name, field] : int_fields) {
      if (key != name) continue;
      auto v = text::parse_int(value);
      require(v.has_value(), key + ": expected an integer, got '" + value + "'");
      c.*field = static_cast<int>(*v);
      found = true;
    }
    for (const auto& [name, field] : double_fields) {
      if (key != name) continue;
      auto v = text::parse_double(value);
      require(v.has_value(), key + ": expected a number, got '" + value + "'");
      c.*field = *v;
      found = true;
    }
    for (const auto& [name, field] : vec_fields) {
      if (key != name) continue;
      c.*field = parse_vec(key, value);
      found = true;
    }
    if (key == "reward_weights") {
      c.reward_weights.w = parse_vec(key, value);
      found = true;
    } else if (key == "seed") {
      auto v = text::parse_int(value);
      require(v.has_value() && *v >= 0, "seed: expected a non-negative integer, got '" + value + "'");
      c.seed = static_cast<std::uint64_t>(*v);
      found = true;
    }
    require(found, "unknown key " + key);
  }
  c.fill_defaults();
  c.validate();
  return c;
}

SessionPolicy visible_policy(const Policy& policy) {
  return [&policy](const SessionState& s, Rng& rng) { return policy.act(s.visible.flatten(), rng); };
}

Simulator::Simulator(SimConfig config) : config_(std::move(config.fill_defaults())) {
  config_.validate();
  bounds_ = ActionBounds::uniform(config_.tasks, config_.action_lo, config_.action_hi);
  beta_.beta = Vec::Constant(config_.tasks, config_.smoothing_bias);

  Rng world(derive_seed(config_.seed, std::uint64_t{0x5eed}));
  const int h = config_.latent_dim;
  profile_projection_.resize(config_.profile_dim, h);
  for (int r = 0; r < config_.profile_dim; ++r)
    for (int c = 0; c < h; ++c) profile_projection_(r, c) = standard_normal(world) / std::sqrt(static_cast<double>(h));
  task_mixing_.resize(static_cast<std::size_t>(config_.tasks));
  for (auto& m : task_mixing_) {
    m.resize(h, h);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < h; ++c) m(r, c) = standard_normal(world);
  }
}

SessionState Simulator::reset(std::uint64_t session_seed) const {
  SessionState s;
  s.rng.seed(session_seed);
  const int h = config_.latent_dim;
  s.latent.resize(h);
  for (int i = 0; i < h; ++i) s.latent(i) = standard_normal(s.rng);
  s.visible.profile = (profile_projection_ * s.latent).array().tanh().matrix();
  for (int i = 0; i < config_.profile_dim; ++i) s.visible.profile(i) += config_.profile_noise * standard_normal(s.rng);
  s.visible.history = Vec::Zero(config_.history_dim());
  s.fatigue = Vec::Zero(config_.tasks);
  draw_candidates(s);
  return s;
}

void Simulator::draw_candidates(SessionState& s) const {
  const int h = config_.latent_dim;
  const int k = config_.tasks;
  s.affinity.assign(static_cast<std::size_t>(config_.candidates), Vec(k));
  s.scores.assign(static_cast<std::size_t>(config_.candidates), TaskScores{Vec(k)});
  Vec item(h);
  for (int c = 0; c < config_.candidates; ++c) {
    for (int i = 0; i < h; ++i) item(i) = standard_normal(s.rng);
    for (int j = 0; j < k; ++j) {
      const double a = config_.affinity_scale * s.latent.dot(task_mixing_[static_cast<std::size_t>(j)] * item) / h +
                       config_.task_offsets(j);
      s.affinity[static_cast<std::size_t>(c)](j) = a;
      const double o = logistic(a + config_.score_noise * standard_normal(s.rng));
      s.scores[static_cast<std::size_t>(c)].o(j) = std::clamp(o, 1e-12, 1.0);
    }
  }
}

const std::vector<TaskScores>& Simulator::candidates(const SessionState& state) const {
  if (state.done) throw std::logic_error("candidates: session already finished");
  return state.scores;
}

StepResult Simulator::step(const SessionState& state, const FusionAction& action) const {
  if (state.done) throw std::logic_error("step: session already finished");
  if (action.alpha.size() != config_.tasks) {
    throw std::invalid_argument("step: action has " + std::to_string(action.alpha.size()) + " entries, expected " +
                                std::to_string(config_.tasks));
  }
  if (!action.alpha.allFinite()) throw std::invalid_argument("step: non-finite action");

  StepResult out;
  out.next = state;
  SessionState& s = out.next;
  const SimConfig& cfg = config_;
  const Vec weights = denormalize_action(action, bounds_);
  out.chosen = rank(s.scores, weights, beta_).best;

  const Vec& raw = s.affinity[out.chosen];
  const Vec eff = raw - cfg.satiation * s.fatigue;

  FeedbackVector& fb = out.feedback;
  fb.v = Vec::Zero(cfg.feedback_dim);
  auto bernoulli = [&](double p) { return uniform01(s.rng) < p ? 1.0 : 0.0; };
  const double task_play = eff(0);
  const double task_integrity = cfg.tasks > 1 ? eff(1) : eff(0);
  const double task_interact = cfg.tasks > 2 ? eff(2) : eff(cfg.tasks - 1);
  const double task_stay = eff(cfg.tasks - 1);
  fb.v(FeedbackVector::play_time) =
      std::min(cfg.play_time_cap,
               cfg.play_time_scale * logistic(task_play) * std::exp(cfg.play_time_sigma * standard_normal(s.rng)));
  fb.v(FeedbackVector::integrity) = logistic(task_integrity + cfg.integrity_noise * standard_normal(s.rng));
  fb.v(FeedbackVector::like) = bernoulli(logistic(task_interact + cfg.like_offset));
  fb.v(FeedbackVector::share) = bernoulli(logistic(task_interact + cfg.share_offset));
  fb.v(FeedbackVector::comment) = bernoulli(logistic(task_interact + cfg.comment_offset));
  fb.v(FeedbackVector::fast_exit) = bernoulli(logistic(-task_stay + cfg.exit_offset));
  out.reward = reward(fb, cfg.reward_weights);

  const double satisfaction = fb.v(FeedbackVector::integrity) + fb.v(FeedbackVector::like) +
                              fb.v(FeedbackVector::share) + fb.v(FeedbackVector::comment) -
                              fb.v(FeedbackVector::fast_exit);

  for (int j = 0; j < cfg.tasks; ++j) {
    s.fatigue(j) = cfg.fatigue_decay * s.fatigue(j) + cfg.fatigue_strength * cfg.fatigue_task_weights(j) *
                                     std::max(0.0, raw(j) - cfg.fatigue_threshold);
  }

  // History layout: feedback EMA (m), last feedback (m), exposure EMA of the
  // chosen item's scores (k), last action (k), last chosen scores (k).
  const int m = cfg.feedback_dim, k = cfg.tasks;
  Vec& hist = s.visible.history;
  const Vec& chosen_scores = s.scores[out.chosen].o;
  hist.segment(0, m) = cfg.history_decay * hist.segment(0, m) + (1.0 - cfg.history_decay) * fb.v;
  hist.segment(m, m) = fb.v;
  hist.segment(2 * m, k) = cfg.fatigue_decay * hist.segment(2 * m, k) + (1.0 - cfg.fatigue_decay) * chosen_scores;
  hist.segment(2 * m + k, k) = clamp_unit(action.alpha);
  hist.segment(2 * m + 2 * k, k) = chosen_scores;

  const double leave_p =
      logistic(cfg.leave_bias - cfg.leave_satisfaction * satisfaction + cfg.leave_fatigue * s.fatigue.sum());
  const bool leave = uniform01(s.rng) < leave_p;
  s.step += 1;
  out.done = leave || s.step >= cfg.max_session_length;
  s.done = out.done;
  if (!out.done) draw_candidates(s);
  return out;
}

double Simulator::expected_reward(const SessionState& state, const FusionAction& action) const {
  const SimConfig& cfg = config_;
  const Vec weights = denormalize_action(action, bounds_);
  const std::size_t chosen = rank(state.scores, weights, beta_).best;
  const Vec eff = state.affinity[chosen] - cfg.satiation * state.fatigue;
  const double task_play = eff(0);
  const double task_integrity = cfg.tasks > 1 ? eff(1) : eff(0);
  const double task_interact = cfg.tasks > 2 ? eff(2) : eff(cfg.tasks - 1);
  const double task_stay = eff(cfg.tasks - 1);
  Vec mean(cfg.feedback_dim);
  mean(FeedbackVector::play_time) =
      capped_lognormal_mean(cfg.play_time_scale * logistic(task_play), cfg.play_time_sigma, cfg.play_time_cap);
  mean(FeedbackVector::integrity) = logistic(task_integrity);
  mean(FeedbackVector::like) = logistic(task_interact + cfg.like_offset);
  mean(FeedbackVector::share) = logistic(task_interact + cfg.share_offset);
  mean(FeedbackVector::comment) = logistic(task_interact + cfg.comment_offset);
  mean(FeedbackVector::fast_exit) = logistic(-task_stay + cfg.exit_offset);
  return cfg.reward_weights.w.dot(mean);
}

double Simulator::max_step_reward() const {
  Vec upper = Vec::Ones(config_.feedback_dim);
  upper(FeedbackVector::play_time) = config_.play_time_cap;
  return config_.reward_weights.w.cwiseMax(0.0).dot(upper);
}

Simulator::Rollout Simulator::rollout(const SessionPolicy& policy, std::uint64_t session_seed,
                                      std::uint64_t policy_seed) const {
  Rollout r;
  Rng policy_rng(policy_seed);
  SessionState s = reset(session_seed);
  while (!s.done) {
    FusionAction a = policy(s, policy_rng);
    r.states.push_back(s.visible.flatten());
    StepResult res = step(s, a);
    r.rewards.push_back(res.reward);
    r.actions.push_back(std::move(a));
    s = std::move(res.next);
  }
  return r;
}

double Simulator::mc_value(const SessionPolicy& policy, int sessions, std::uint64_t seed, double gamma) const {
  if (sessions < 1) throw std::invalid_argument("mc_value: need at least one session");
  double total = 0.0;
  for (int i = 0; i < sessions; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    Rng policy_rng(derive_seed(~seed, idx));
    SessionState s = reset(derive_seed(seed, idx));
    double discount = 1.0, ret = 0.0;
    while (!s.done) {
      StepResult res = step(s, policy(s, policy_rng));
      ret += discount * res.reward;
      discount *= gamma;
      s = std::move(res.next);
    }
    total += ret;
  }
  return total / sessions;
}

double Simulator::mc_value(const Policy& policy, int sessions, std::uint64_t seed, double gamma) const {
  return mc_value(visible_policy(policy), sessions, seed, gamma);
}

SessionPolicy greedy_policy(const Simulator& sim, int grid_points) {
  if (grid_points < 2) throw std::invalid_argument("greedy_policy: need at least 2 grid points per dimension");
  const int k = sim.action_dim();
  std::vector<FusionAction> grid;
  std::vector<int> digits(static_cast<std::size_t>(k), 0);
  while (true) {
    Vec a(k);
    for (int j = 0; j < k; ++j) a(j) = -1.0 + 2.0 * digits[static_cast<std::size_t>(j)] / (grid_points - 1);
    grid.push_back({a});
    int j = 0;
    while (j < k && ++digits[static_cast<std::size_t>(j)] == grid_points) digits[static_cast<std::size_t>(j++)] = 0;
    if (j == k) break;
  }
  return [&sim, grid = std::move(grid)](const SessionState& s, Rng&) {
    std::size_t best = 0;
    double best_value = sim.expected_reward(s, grid[0]);
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double v = sim.expected_reward(s, grid[i]);
      if (v > best_value) {
        best_value = v;
        best = i;
      }
    }
    return grid[best];
  };
}

}  // namespace mtf
