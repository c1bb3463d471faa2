#pragma once

// A 3-state, 2-action MDP small enough for exact backward induction.
// States are one-hot vectors, actions are -1 or +1 in a 1-d action box.
// Each step ends the session with probability `stop`; step horizon-1 always
// ends it.

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "mtf/datastore.hpp"
#include "mtf/policy.hpp"
#include "mtf/rng.hpp"

namespace mtf::testing {

struct TabularMdp {
  static constexpr int states = 3;
  double stop = 0.1;
  int horizon = 50;
  double gamma = 0.95;

  // reward[s][a], a = 0 for -1 and 1 for +1.
  std::array<std::array<double, 2>, 3> reward{{{1.0, 0.0}, {0.0, 2.0}, {0.5, 1.0}}};
  // next[s][a][s'].
  std::array<std::array<std::array<double, 3>, 2>, 3> next{{
      {{{0.7, 0.0, 0.3}, {0.2, 0.8, 0.0}}},
      {{{0.7, 0.0, 0.3}, {0.0, 0.2, 0.8}}},
      {{{0.7, 0.0, 0.3}, {0.8, 0.0, 0.2}}},
  }};

  static Vec encode(int s) {
    Vec v = Vec::Zero(states);
    v(s) = 1.0;
    return v;
  }
  static int decode(const Vec& v) {
    int best = 0;
    for (int i = 1; i < states; ++i)
      if (v(i) > v(best)) best = i;
    return best;
  }
  static int action_index(double a) { return a > 0.0 ? 1 : 0; }

  // Exact value at step 0 of a deterministic policy given as choice[s].
  std::array<double, 3> exact_values(const std::array<int, 3>& choice) const {
    std::array<double, 3> v{0.0, 0.0, 0.0};
    for (int t = horizon - 1; t >= 0; --t) {
      std::array<double, 3> u{};
      for (int s = 0; s < states; ++s) {
        const int a = choice[static_cast<std::size_t>(s)];
        double cont = 0.0;
        if (t < horizon - 1)
          for (int n = 0; n < states; ++n) cont += next[s][a][n] * v[static_cast<std::size_t>(n)];
        u[static_cast<std::size_t>(s)] = reward[s][a] + gamma * (1.0 - stop) * cont;
      }
      v = u;
    }
    return v;
  }

  // Behavior picks +1 with probability `plus`; initial state uniform.
  TransitionDataset collect(int sessions, std::uint64_t seed, double plus = 0.5) const {
    TransitionDataset d;
    d.meta.state_dim = states;
    d.meta.action_dim = 1;
    d.meta.feedback_dim = 1;
    d.meta.seed = seed;
    d.meta.policy = "uniform";
    Rng rng(seed);
    std::uniform_int_distribution<int> pick_state(0, states - 1);
    for (int i = 0; i < sessions; ++i) {
      int s = pick_state(rng);
      for (int t = 0; t < horizon; ++t) {
        const int a = uniform01(rng) < plus ? 1 : 0;
        const double u = uniform01(rng);
        int n = 0;
        double acc = next[s][a][0];
        while (u >= acc && n < states - 1) acc += next[s][a][++n];
        const bool done = t == horizon - 1 || uniform01(rng) < stop;
        Transition tr;
        tr.state = encode(s);
        tr.action = Vec::Constant(1, a == 1 ? 1.0 : -1.0);
        tr.reward = reward[s][a];
        tr.next_state = encode(n);
        tr.done = done;
        tr.session_id = static_cast<std::uint64_t>(i);
        tr.step = t;
        d.transitions.push_back(std::move(tr));
        if (done) break;
        s = n;
      }
    }
    return d;
  }
};

// Deterministic policy over the one-hot states.
class TablePolicy final : public Policy {
 public:
  explicit TablePolicy(std::array<int, 3> choice) : choice_(choice) {}
  FusionAction act(const Vec& state, Rng&) const override {
    return {Vec::Constant(1, choice_[static_cast<std::size_t>(TabularMdp::decode(state))] == 1 ? 1.0 : -1.0)};
  }
  std::string name() const override { return "table"; }
  const std::array<int, 3>& choice() const { return choice_; }

 private:
  std::array<int, 3> choice_;
};

}  // namespace mtf::testing
