#pragma once

// Offline TD3: deterministic actor, twin critics, delayed actor and target
// updates, clipped Gaussian target smoothing. Nothing keeps the actor near
// the logged actions, which is the point of comparison with BCQ.

#include <iosfwd>
#include <memory>

#include "mtf/agent.hpp"
#include "mtf/datastore.hpp"
#include "mtf/nn.hpp"
#include "mtf/policy.hpp"

namespace mtf {

class Td3Agent {
 public:
  // Uses gamma, batch_size, target_rate, lr_critic, hidden, policy_delay and
  // the target noise fields; lr_perturb is the actor learning rate.
  Td3Agent(int state_dim, int action_dim, AgentHyperparams hyper, Rng& rng);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  const AgentHyperparams& hyper() const { return hyper_; }

  nn::Matrix act(const nn::Matrix& states, bool use_target = false) const;
  nn::Matrix q1(const nn::Matrix& states, const nn::Matrix& actions, bool use_target = false) const;

  nn::Vector critic_target(const Batch& batch, Rng& rng) const;
  double critic_regression(const Batch& batch, const nn::Vector& targets);
  // Returns mean Q1(s, pi(s)) before the step.
  double actor_update(const Batch& batch);
  void soft_update_targets();

  EpochLog train_epoch(const Batch& batch, long epoch, Rng& rng);

  const nn::Trainable& actor() const { return actor_; }
  bool all_finite() const;

  void save(std::ostream& out) const;
  static Td3Agent load(std::istream& in);

 private:
  Td3Agent() = default;

  int state_dim_ = 0;
  int action_dim_ = 0;
  AgentHyperparams hyper_;
  nn::Trainable actor_, critic1_, critic2_;
  nn::NetworkParams actor_target_, critic1_target_, critic2_target_;
};

struct Td3Result {
  std::shared_ptr<Td3Agent> agent;
  TrainingLog log;
};

Td3Result train_td3(const TransitionDataset& dataset, const AgentHyperparams& hyper, Rng& rng,
                    const EpochObserver& observer = {});

class Td3Policy final : public Policy {
 public:
  explicit Td3Policy(std::shared_ptr<const Td3Agent> agent) : agent_(std::move(agent)) {}
  FusionAction act(const Vec& state, Rng&) const override { return {agent_->act(state).col(0)}; }
  nn::Matrix act_batch(const nn::Matrix& states, Rng&) const override { return agent_->act(states); }
  std::string name() const override { return "td3"; }

 private:
  std::shared_ptr<const Td3Agent> agent_;
};

}  // namespace mtf
