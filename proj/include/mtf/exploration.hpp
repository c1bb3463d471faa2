#pragma once

// Logged-data collection against the simulator. Session i of a collection
// with seed s uses derive_seed(s, i) for the user, derive_seed(~s, i) for the
// acting policy and, in noise mode, derive_seed(s ^ noise_salt, i) for the
// exploration noise.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "mtf/datastore.hpp"
#include "mtf/policy.hpp"
#include "mtf/simulator.hpp"

namespace mtf {

enum class ExplorationMode { random, action_noise, mixed };

std::string to_string(ExplorationMode mode);
ExplorationMode parse_exploration_mode(std::string_view name);

struct ExplorationConfig {
  ExplorationMode mode = ExplorationMode::random;
  double sigma = 0.1;
  int sessions = 1000;
  std::uint64_t seed = 1;
  std::optional<std::string> agent_path;

  // Noise modes need a source agent and sigma > 0.
  void validate() const;
};

inline constexpr std::uint64_t noise_salt = 0x6e6f697365ULL;

TransitionDataset collect_random(const Simulator& sim, int sessions, std::uint64_t seed);

// Logs `policy` as is. With a RandomPolicy this reproduces collect_random.
TransitionDataset collect_policy(const Simulator& sim, const Policy& policy, int sessions, std::uint64_t seed);

// action = clamp(agent(s) + eps, -1, 1), eps ~ N(0, sigma^2 I). The agent's
// own randomness and eps come from separate streams, so sigma = 0 logs exactly
// what the agent would do.
TransitionDataset collect_action_noise(const Simulator& sim, const std::shared_ptr<const Policy>& agent, double sigma,
                                       int sessions, std::uint64_t seed);

// Seeds of the two sub-collections that make up a mixed collection.
std::uint64_t mixed_noise_seed(std::uint64_t seed);
std::uint64_t mixed_random_seed(std::uint64_t seed);

// ceil(n/2) action-noise sessions on even indices, floor(n/2) random sessions
// on odd indices. Session j of each kind is session j of the corresponding
// sub-collection run with mixed_*_seed(seed); ids are renumbered 0..n-1.
TransitionDataset collect_mixed(const Simulator& sim, const std::shared_ptr<const Policy>& agent, double sigma,
                                int sessions, std::uint64_t seed);

}  // namespace mtf
