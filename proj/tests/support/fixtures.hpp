#pragma once

// Small agents, batches and hand-built networks shared by the learner tests.

#include "mtf/agent.hpp"
#include "mtf/datastore.hpp"
#include "mtf/nn.hpp"
#include "oracles.hpp"

namespace mtf::testing {

inline AgentHyperparams tiny_hyper() {
  AgentHyperparams h;
  h.hidden = {8, 8};
  h.batch_size = 16;
  h.epochs = 20;
  h.target_every = 3;
  h.target_rate = 0.25;
  return h;
}

inline Batch random_batch(int ds, int k, int n, Rng& rng, double done_rate = 0.2) {
  Batch b;
  b.states = normal_matrix(ds, n, rng);
  b.actions = uniform_matrix(k, n, -0.9, 0.9, rng);
  b.rewards = normal_matrix(n, 1, rng);
  b.next_states = normal_matrix(ds, n, rng);
  b.not_done.resize(n);
  for (int i = 0; i < n; ++i) b.not_done(i) = uniform01(rng) < done_rate ? 0.0 : 1.0;
  return b;
}

// Sessions of random transitions, suitable for the training entry points.
inline TransitionDataset random_dataset(int ds, int k, int sessions, int length, Rng& rng) {
  TransitionDataset d;
  d.meta = {ds, k, 6, 0, "random"};
  for (int s = 0; s < sessions; ++s) {
    for (int t = 0; t < length; ++t) {
      Transition tr;
      tr.state = normal_matrix(ds, 1, rng);
      tr.action = uniform_matrix(k, 1, -1.0, 1.0, rng);
      tr.reward = uniform01(rng);
      tr.next_state = normal_matrix(ds, 1, rng);
      tr.done = t + 1 == length;
      tr.session_id = static_cast<std::uint64_t>(s);
      tr.step = t;
      d.transitions.push_back(std::move(tr));
    }
  }
  return d;
}

// Rewrites a critic over (state, action) so that Q = sum_i coef_i * (a_i + 2).
// Every hidden layer must be at least as wide as the action.
inline void make_linear_critic(nn::Trainable& critic, int state_dim, const Vec& coef) {
  const int k = static_cast<int>(coef.size());
  auto& p = critic.params;
  for (auto& w : p.weights) w.setZero();
  for (auto& b : p.biases) b.setZero();
  for (int i = 0; i < k; ++i) {
    p.weights[0](i, state_dim + i) = 1.0;
    p.biases[0](i) = 2.0;
  }
  for (std::size_t l = 1; l + 1 < p.weights.size(); ++l)
    for (int i = 0; i < k; ++i) p.weights[l](i, i) = 1.0;
  for (int i = 0; i < k; ++i) p.weights.back()(0, i) = coef(i);
}

inline void make_constant(nn::NetworkParams& p, double value) {
  for (auto& w : p.weights) w.setZero();
  for (auto& b : p.biases) b.setZero();
  p.biases.back().setConstant(value);
}

}  // namespace mtf::testing
