#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "mtf/bcq.hpp"
#include "mtf/exploration.hpp"

using namespace mtf;
using namespace mtf::testing;

namespace {

const Simulator& sim() {
  static const Simulator s{SimConfig{}};
  return s;
}

std::shared_ptr<const BcqPolicy> small_bcq() {
  static const auto policy = [] {
    Rng rng(3);
    const TransitionDataset d = collect_random(sim(), 20, 5);
    AgentHyperparams h = tiny_hyper();
    h.epochs = 30;
    return std::make_shared<const BcqPolicy>(train_bcq(d, h, rng).agent);
  }();
  return policy;
}

std::string bytes(const TransitionDataset& d) {
  std::ostringstream out;
  write_dataset(out, d);
  return out.str();
}

// Sessions in file order, each as its transition list.
std::vector<std::vector<Transition>> by_session(const TransitionDataset& d) {
  std::vector<std::vector<Transition>> out;
  for (const auto& t : d.transitions) {
    if (out.empty() || out.back().front().session_id != t.session_id) out.emplace_back();
    out.back().push_back(t);
  }
  return out;
}

bool same_except_id(const std::vector<Transition>& a, const std::vector<Transition>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    Transition x = a[i];
    x.session_id = b[i].session_id;
    if (!(x == b[i])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("exploration modes and config") {
  CHECK(parse_exploration_mode("mixed") == ExplorationMode::mixed);
  CHECK(parse_exploration_mode("action_noise") == ExplorationMode::action_noise);
  CHECK(to_string(ExplorationMode::random) == "random");
  CHECK_THROWS(parse_exploration_mode("greedy"));
  ExplorationConfig c;
  CHECK_NOTHROW(c.validate());
  c.mode = ExplorationMode::action_noise;
  CHECK_THROWS(c.validate());
  c.agent_path = "agent.ckpt";
  CHECK_NOTHROW(c.validate());
  c.sigma = 0.0;
  CHECK_THROWS(c.validate());
  c.sigma = 0.1;
  c.mode = ExplorationMode::mixed;
  c.sessions = 1;
  CHECK_THROWS(c.validate());
}

TEST_CASE("random collection structure and determinism") {
  const TransitionDataset one = collect_random(sim(), 1, 4);
  CHECK(one.session_count() == 1);
  CHECK(one.transitions.back().done);
  CHECK_NOTHROW(one.validate());
  CHECK(bytes(collect_random(sim(), 30, 9)) == bytes(collect_random(sim(), 30, 9)));
  CHECK(bytes(collect_random(sim(), 30, 9)) != bytes(collect_random(sim(), 30, 10)));
  CHECK_THROWS(collect_random(sim(), 0, 1));
}

TEST_CASE("random actions are centered clamped normals") {
  const TransitionDataset d = collect_random(sim(), 1000, 17);
  REQUIRE(d.size() >= 10000);
  Vec mean = Vec::Zero(4);
  for (const auto& t : d.transitions) {
    CHECK(t.action.cwiseAbs().maxCoeff() <= 1.0);
    mean += t.action;
  }
  mean /= static_cast<double>(d.size());
  CHECK(mean.cwiseAbs().maxCoeff() < 0.05);
  for (const auto& [id, mode] : d.session_modes) CHECK(mode == "random");
}

TEST_CASE("zero noise logs the agent's own actions") {
  const auto agent = small_bcq();
  const std::uint64_t seed = 21;
  const TransitionDataset d = collect_action_noise(sim(), agent, 0.0, 5, seed);
  CHECK_NOTHROW(d.validate());
  for (const auto& session : by_session(d)) {
    Rng policy_rng(derive_seed(~seed, session.front().session_id));
    for (const auto& t : session) CHECK(t.action == agent->act(t.state, policy_rng).alpha);
  }
  CHECK_THROWS(collect_action_noise(sim(), nullptr, 0.1, 5, seed));
}

TEST_CASE("action noise has the requested spread") {
  auto centre = std::make_shared<const ConstantPolicy>(Vec::Zero(4));
  const TransitionDataset d = collect_action_noise(sim(), centre, 0.1, 1000, 23);
  double sq = 0.0, n = 0.0;
  for (const auto& t : d.transitions) {
    sq += t.action.squaredNorm();
    n += 4;
  }
  const double sd = std::sqrt(sq / n);
  CHECK(sd == doctest::Approx(0.1).epsilon(0.2));
  CHECK(bytes(d) == bytes(collect_action_noise(sim(), centre, 0.1, 1000, 23)));
}

TEST_CASE("mixed collection splits and tags sessions") {
  const auto agent = small_bcq();
  const TransitionDataset two = collect_mixed(sim(), agent, 0.1, 2, 3);
  REQUIRE(two.session_count() == 2);
  CHECK(two.session_modes.at(0) == "action_noise");
  CHECK(two.session_modes.at(1) == "random");
  CHECK_THROWS(collect_mixed(sim(), agent, 0.1, 1, 3));

  for (int n : {3, 10, 11}) {
    const TransitionDataset d = collect_mixed(sim(), agent, 0.1, n, 8);
    CHECK_NOTHROW(d.validate());
    int random = 0, noisy = 0;
    for (const auto& [id, mode] : d.session_modes) (mode == "random" ? random : noisy)++;
    CHECK(random == n / 2);
    CHECK(noisy == n - n / 2);
    CHECK(std::abs(random - noisy) <= 1);
  }
}

TEST_CASE("mixed collection is the interleaving of its sub-collections") {
  const auto agent = small_bcq();
  const int n = 9;
  const std::uint64_t seed = 31;
  const TransitionDataset mixed = collect_mixed(sim(), agent, 0.1, n, seed);
  const auto noisy = by_session(collect_action_noise(sim(), agent, 0.1, (n + 1) / 2, mixed_noise_seed(seed)));
  const auto random = by_session(collect_random(sim(), n / 2, mixed_random_seed(seed)));
  const auto parts = by_session(mixed);
  REQUIRE(parts.size() == static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    CHECK(parts[i].front().session_id == i);
    CHECK(same_except_id(parts[i], i % 2 == 0 ? noisy[i / 2] : random[i / 2]));
  }
}

TEST_CASE("collected datasets round trip") {
  const TransitionDataset d = collect_mixed(sim(), small_bcq(), 0.1, 6, 2);
  std::stringstream ss;
  write_dataset(ss, d);
  CHECK(read_dataset(ss) == d);
}

TEST_CASE("policy collection with the random policy matches random collection") {
  const RandomPolicy random(sim().action_dim());
  const TransitionDataset a = collect_policy(sim(), random, 6, 21);
  const TransitionDataset b = collect_random(sim(), 6, 21);
  CHECK(a.transitions == b.transitions);
  CHECK(a.meta == b.meta);

  const ConstantPolicy fixed(Vec::Constant(4, 0.25));
  const TransitionDataset c = collect_policy(sim(), fixed, 3, 21);
  CHECK(c.meta.policy == "constant");
  CHECK(c.session_count() == 3);
  for (const auto& t : c.transitions) CHECK(t.action == Vec::Constant(4, 0.25));
  CHECK_NOTHROW(c.validate());
}
