#pragma once

// Batch-constrained Q-learning over the fusion action space: a conditional
// VAE models the logged actions, a perturbation network nudges VAE samples by
// at most rho per dimension, and twin critics score the result.

#include <cstdint>
#include <iosfwd>
#include <memory>

#include "mtf/agent.hpp"
#include "mtf/datastore.hpp"
#include "mtf/nn.hpp"
#include "mtf/policy.hpp"

namespace mtf {

struct VaeLoss {
  double total = 0.0;
  double reconstruction = 0.0;  // batch mean of squared error summed over action dims
  double kl = 0.0;              // batch mean of KL summed over latent dims
};

// KL(N(mu, exp(logstd)^2) || N(0, 1)) summed over entries.
double gaussian_kl(const nn::Vector& mu, const nn::Vector& logstd);

// r + gamma * (1 - done) * max_j min(q1_j, q2_j).
double clipped_double_q_target(double reward, bool done, double gamma, const nn::Vector& q1, const nn::Vector& q2);

struct ActionChoice {
  Vec action;     // perturbed action actually taken
  Vec candidate;  // VAE sample it came from
  int index = 0;  // which of the n candidates won
};

class BcqAgent {
 public:
  static constexpr double logstd_min = -4.0;
  static constexpr double logstd_max = 15.0;

  BcqAgent(int state_dim, int action_dim, AgentHyperparams hyper, Rng& rng);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  int latent_dim() const { return latent_dim_; }
  const AgentHyperparams& hyper() const { return hyper_; }

  // VAE loss on (states, actions) with explicit reparameterization noise
  // (latent_dim x batch). Fills `grads` with encoder and decoder gradients
  // when non-null.
  VaeLoss vae_loss(const nn::Matrix& states, const nn::Matrix& actions, const nn::Matrix& noise,
                   nn::NetworkParams* encoder_grads = nullptr, nn::NetworkParams* decoder_grads = nullptr) const;
  VaeLoss vae_update(const Batch& batch, Rng& rng);

  // Decodes clipped latent draws; one column per state column.
  nn::Matrix decode_samples(const nn::Matrix& states, Rng& rng) const;
  // n VAE samples for one state, one per column.
  nn::Matrix sample_actions(const Vec& state, int n, Rng& rng) const;

  // clamp(a + rho * tanh-net(s, a), -1, 1), column-wise.
  nn::Matrix perturb(const nn::Matrix& states, const nn::Matrix& actions, bool use_target = false) const;

  nn::Matrix q1(const nn::Matrix& states, const nn::Matrix& actions, bool use_target = false) const;
  nn::Matrix q2(const nn::Matrix& states, const nn::Matrix& actions, bool use_target = false) const;

  ActionChoice select_action(const Vec& state, Rng& rng) const;
  // select_action for every column of `states`.
  nn::Matrix select_actions(const nn::Matrix& states, Rng& rng) const;

  nn::Vector critic_target(const Batch& batch, Rng& rng) const;
  // mean (Q_j(s, a) - y)^2 for critic j in {1, 2}; `grads` receives its
  // parameter gradient when non-null.
  double critic_loss(int which, const Batch& batch, const nn::Vector& targets, nn::NetworkParams* grads = nullptr) const;
  // mean Q1(s, clamp(a + rho * psi(s, a), -1, 1)) over the columns, with `candidates`
  // held fixed. `loss_grads` receives the perturbation-net gradient of the
  // negated objective.
  double perturbation_objective(const nn::Matrix& states, const nn::Matrix& candidates,
                                nn::NetworkParams* loss_grads = nullptr) const;
  // One Adam step on both critics toward fixed targets; returns the mean loss.
  double critic_regression(const Batch& batch, const nn::Vector& targets);
  double critic_update(const Batch& batch, Rng& rng) { return critic_regression(batch, critic_target(batch, rng)); }
  // One DPG step on the perturbation net; returns mean Q1 before the step.
  double perturbation_update(const Batch& batch, Rng& rng);
  void soft_update_targets();

  // One full epoch on `batch`; `epoch` is 1-based and drives target updates.
  EpochLog train_epoch(const Batch& batch, long epoch, Rng& rng);

  const nn::Trainable& encoder() const { return encoder_; }
  const nn::Trainable& decoder() const { return decoder_; }
  const nn::Trainable& perturbation() const { return perturb_; }
  const nn::Trainable& critic1() const { return critic1_; }
  const nn::Trainable& critic2() const { return critic2_; }
  const nn::NetworkParams& perturbation_target() const { return perturb_target_; }
  const nn::NetworkParams& critic1_target() const { return critic1_target_; }
  const nn::NetworkParams& critic2_target() const { return critic2_target_; }
  nn::Trainable& mutable_encoder() { return encoder_; }
  nn::Trainable& mutable_decoder() { return decoder_; }
  nn::Trainable& mutable_critic1() { return critic1_; }
  nn::Trainable& mutable_critic2() { return critic2_; }
  nn::NetworkParams& mutable_critic1_target() { return critic1_target_; }
  nn::NetworkParams& mutable_critic2_target() { return critic2_target_; }
  nn::Trainable& mutable_perturbation() { return perturb_; }
  nn::NetworkParams& mutable_perturbation_target() { return perturb_target_; }

  bool all_finite() const;

  // Parameters, hyperparameters and dimensions. Optimizer moments are not saved.
  void save(std::ostream& out) const;
  static BcqAgent load(std::istream& in);

 private:
  BcqAgent() = default;

  int state_dim_ = 0;
  int action_dim_ = 0;
  int latent_dim_ = 0;
  AgentHyperparams hyper_;
  nn::Trainable encoder_, decoder_, perturb_, critic1_, critic2_;
  nn::NetworkParams perturb_target_, critic1_target_, critic2_target_;
};

struct BcqResult {
  std::shared_ptr<BcqAgent> agent;
  TrainingLog log;
};

// Loads the dataset into a replay buffer of `hyper.buffer_capacity` and runs
// `hyper.epochs` epochs, or until `observer` returns false.
BcqResult train_bcq(const TransitionDataset& dataset, const AgentHyperparams& hyper, Rng& rng,
                    const EpochObserver& observer = {});

class BcqPolicy final : public Policy {
 public:
  explicit BcqPolicy(std::shared_ptr<const BcqAgent> agent) : agent_(std::move(agent)) {}
  FusionAction act(const Vec& state, Rng& rng) const override { return {agent_->select_action(state, rng).action}; }
  nn::Matrix act_batch(const nn::Matrix& states, Rng& rng) const override { return agent_->select_actions(states, rng); }
  std::string name() const override { return "bcq"; }
  bool deterministic() const override { return false; }
  const BcqAgent& agent() const { return *agent_; }

 private:
  std::shared_ptr<const BcqAgent> agent_;
};

}  // namespace mtf
