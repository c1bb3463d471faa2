#include "mtf/exploration.hpp"

#include <stdexcept>

namespace mtf {

namespace {

using ActionFn = std::function<Vec(const Vec& state, Rng& policy_rng, Rng& noise_rng)>;

void run_session(const Simulator& sim, const ActionFn& act, std::uint64_t seed, std::uint64_t index,
                 std::uint64_t session_id, std::vector<Transition>& out) {
  Rng policy_rng(derive_seed(~seed, index));
  Rng noise_rng(derive_seed(seed ^ noise_salt, index));
  SessionState s = sim.reset(derive_seed(seed, index));
  while (!s.done) {
    Transition t;
    t.state = s.visible.flatten();
    t.action = clamp_unit(act(t.state, policy_rng, noise_rng));
    StepResult res = sim.step(s, FusionAction{t.action});
    t.reward = res.reward;
    t.next_state = res.next.visible.flatten();
    t.done = res.done;
    t.session_id = session_id;
    t.step = s.step;
    out.push_back(std::move(t));
    s = std::move(res.next);
  }
}

TransitionDataset empty_dataset(const Simulator& sim, std::uint64_t seed, std::string policy) {
  TransitionDataset d;
  d.meta.state_dim = sim.state_dim();
  d.meta.action_dim = sim.action_dim();
  d.meta.feedback_dim = sim.config().feedback_dim;
  d.meta.seed = seed;
  d.meta.policy = std::move(policy);
  return d;
}

ActionFn random_fn(int k) {
  return [k](const Vec&, Rng& rng, Rng&) {
    Vec a(k);
    for (int i = 0; i < k; ++i) a(i) = standard_normal(rng);
    return a;
  };
}

ActionFn noise_fn(std::shared_ptr<const Policy> agent, double sigma) {
  return [agent = std::move(agent), sigma](const Vec& s, Rng& rng, Rng& noise) {
    Vec a = agent->act(s, rng).alpha;
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += sigma * standard_normal(noise);
    return a;
  };
}

void check_sessions(int sessions) {
  if (sessions < 1) throw std::invalid_argument("collection needs at least one session");
}

}  // namespace

std::string to_string(ExplorationMode mode) {
  switch (mode) {
    case ExplorationMode::random: return "random";
    case ExplorationMode::action_noise: return "action_noise";
    case ExplorationMode::mixed: return "mixed";
  }
  return "unknown";
}

ExplorationMode parse_exploration_mode(std::string_view name) {
  if (name == "random") return ExplorationMode::random;
  if (name == "action_noise" || name == "action-noise" || name == "noise") return ExplorationMode::action_noise;
  if (name == "mixed") return ExplorationMode::mixed;
  throw std::invalid_argument("unknown exploration mode: " + std::string(name));
}

void ExplorationConfig::validate() const {
  if (sessions < 1) throw std::invalid_argument("exploration: sessions must be >= 1");
  if (mode == ExplorationMode::mixed && sessions < 2) throw std::invalid_argument("exploration: mixed needs >= 2 sessions");
  if (mode != ExplorationMode::random) {
    if (!agent_path) throw std::invalid_argument("exploration: " + to_string(mode) + " needs a source agent");
    if (!(sigma > 0.0)) throw std::invalid_argument("exploration: sigma must be > 0");
  }
}

TransitionDataset collect_random(const Simulator& sim, int sessions, std::uint64_t seed) {
  check_sessions(sessions);
  TransitionDataset d = empty_dataset(sim, seed, "random");
  const ActionFn act = random_fn(sim.action_dim());
  for (int i = 0; i < sessions; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    run_session(sim, act, seed, idx, idx, d.transitions);
    d.session_modes[idx] = "random";
  }
  return d;
}

TransitionDataset collect_policy(const Simulator& sim, const Policy& policy, int sessions, std::uint64_t seed) {
  check_sessions(sessions);
  TransitionDataset d = empty_dataset(sim, seed, policy.name());
  const ActionFn act = [&policy](const Vec& s, Rng& rng, Rng&) { return policy.act(s, rng).alpha; };
  for (int i = 0; i < sessions; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    run_session(sim, act, seed, idx, idx, d.transitions);
    d.session_modes[idx] = policy.name();
  }
  return d;
}

TransitionDataset collect_action_noise(const Simulator& sim, const std::shared_ptr<const Policy>& agent, double sigma,
                                       int sessions, std::uint64_t seed) {
  if (!agent) throw std::invalid_argument("action-noise collection needs a source agent");
  if (!(sigma >= 0.0)) throw std::invalid_argument("action-noise sigma must be non-negative");
  check_sessions(sessions);
  TransitionDataset d = empty_dataset(sim, seed, "action_noise");
  const ActionFn act = noise_fn(agent, sigma);
  for (int i = 0; i < sessions; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    run_session(sim, act, seed, idx, idx, d.transitions);
    d.session_modes[idx] = "action_noise";
  }
  return d;
}

std::uint64_t mixed_noise_seed(std::uint64_t seed) { return derive_seed(seed, 1); }
std::uint64_t mixed_random_seed(std::uint64_t seed) { return derive_seed(seed, 2); }

TransitionDataset collect_mixed(const Simulator& sim, const std::shared_ptr<const Policy>& agent, double sigma,
                                int sessions, std::uint64_t seed) {
  if (!agent) throw std::invalid_argument("mixed collection needs a source agent");
  if (!(sigma >= 0.0)) throw std::invalid_argument("action-noise sigma must be non-negative");
  if (sessions < 2) throw std::invalid_argument("mixed collection needs at least two sessions");
  TransitionDataset d = empty_dataset(sim, seed, "mixed");
  const ActionFn noisy = noise_fn(agent, sigma);
  const ActionFn random = random_fn(sim.action_dim());
  const std::uint64_t noise_seed = mixed_noise_seed(seed);
  const std::uint64_t random_seed = mixed_random_seed(seed);
  for (int i = 0; i < sessions; ++i) {
    const auto id = static_cast<std::uint64_t>(i);
    const auto sub = static_cast<std::uint64_t>(i / 2);
    if (i % 2 == 0) {
      run_session(sim, noisy, noise_seed, sub, id, d.transitions);
      d.session_modes[id] = "action_noise";
    } else {
      run_session(sim, random, random_seed, sub, id, d.transitions);
      d.session_modes[id] = "random";
    }
  }
  return d;
}

}  // namespace mtf
