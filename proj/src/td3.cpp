#include "mtf/td3.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

namespace mtf {

using detail::stack;
using nn::Matrix;
using nn::Vector;

Td3Agent::Td3Agent(int state_dim, int action_dim, AgentHyperparams hyper, Rng& rng)
    : state_dim_(state_dim), action_dim_(action_dim), hyper_(std::move(hyper)) {
  if (state_dim < 1 || action_dim < 1) throw std::invalid_argument("TD3 agent needs positive state and action sizes");
  hyper_.validate();
  using nn::Activation;
  using nn::NetworkSpec;
  const auto& h = hyper_.hidden;
  actor_ = nn::Trainable(NetworkSpec::mlp(state_dim, h, action_dim, Activation::tanh), hyper_.lr_perturb, rng);
  critic1_ = nn::Trainable(NetworkSpec::mlp(state_dim + action_dim, h, 1, Activation::linear), hyper_.lr_critic, rng);
  critic2_ = nn::Trainable(NetworkSpec::mlp(state_dim + action_dim, h, 1, Activation::linear), hyper_.lr_critic, rng);
  actor_target_ = actor_.params;
  critic1_target_ = critic1_.params;
  critic2_target_ = critic2_.params;
}

Matrix Td3Agent::act(const Matrix& states, bool use_target) const {
  if (states.rows() != state_dim_) throw std::invalid_argument("td3 act: state size mismatch");
  return nn::forward_batch(use_target ? actor_target_ : actor_.params, actor_.spec, states);
}

Matrix Td3Agent::q1(const Matrix& states, const Matrix& actions, bool use_target) const {
  return nn::forward_batch(use_target ? critic1_target_ : critic1_.params, critic1_.spec, stack(states, actions));
}

Vector Td3Agent::critic_target(const Batch& batch, Rng& rng) const {
  const double c = hyper_.target_noise_clip;
  Matrix noise = (hyper_.target_noise * detail::standard_normal_matrix(action_dim_, batch.size(), rng))
                     .cwiseMax(-c)
                     .cwiseMin(c);
  const Matrix next_actions = detail::clamp_unit(act(batch.next_states, true) + noise);
  const Matrix input = stack(batch.next_states, next_actions);
  const Matrix t1 = nn::forward_batch(critic1_target_, critic1_.spec, input);
  const Matrix t2 = nn::forward_batch(critic2_target_, critic2_.spec, input);
  const Vector next_q = t1.cwiseMin(t2).row(0).transpose();
  return batch.rewards + hyper_.gamma * batch.not_done.cwiseProduct(next_q);
}

double Td3Agent::critic_regression(const Batch& batch, const Vector& targets) {
  if (targets.size() != batch.size()) throw std::invalid_argument("critic_regression: target count mismatch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  const Matrix input = stack(batch.states, batch.actions);
  double total = 0.0;
  for (nn::Trainable* critic : {&critic1_, &critic2_}) {
    nn::ForwardCache cache;
    const Matrix err = (*critic)(input, cache) - targets.transpose();
    total += err.squaredNorm() * inv;
    critic->step(critic->backward(cache, 2.0 * inv * err).params);
  }
  return 0.5 * total;
}

double Td3Agent::actor_update(const Batch& batch) {
  const double inv = 1.0 / static_cast<double>(batch.size());
  nn::ForwardCache a_cache;
  const Matrix actions = actor_(batch.states, a_cache);
  nn::ForwardCache q_cache;
  const Matrix q = critic1_(stack(batch.states, actions), q_cache);
  const Matrix d_act =
      critic1_.backward(q_cache, Matrix::Constant(1, batch.size(), -inv)).input.bottomRows(action_dim_);
  actor_.step(actor_.backward(a_cache, d_act).params);
  return q.sum() * inv;
}

void Td3Agent::soft_update_targets() {
  nn::soft_update(actor_target_, actor_.params, hyper_.target_rate);
  nn::soft_update(critic1_target_, critic1_.params, hyper_.target_rate);
  nn::soft_update(critic2_target_, critic2_.params, hyper_.target_rate);
}

EpochLog Td3Agent::train_epoch(const Batch& batch, long epoch, Rng& rng) {
  EpochLog log;
  log.epoch = epoch;
  log.critic_loss = critic_regression(batch, critic_target(batch, rng));
  if (epoch % hyper_.policy_delay == 0) {
    log.actor_objective = actor_update(batch);
    soft_update_targets();
  } else {
    log.actor_objective = q1(batch.states, act(batch.states)).mean();
  }
  log.mean_q = log.actor_objective;
  return log;
}

bool Td3Agent::all_finite() const {
  return actor_.params.all_finite() && critic1_.params.all_finite() && critic2_.params.all_finite() &&
         actor_target_.all_finite() && critic1_target_.all_finite() && critic2_target_.all_finite();
}

void Td3Agent::save(std::ostream& out) const {
  detail::write_header(out, "td3", {{"state", state_dim_}, {"action", action_dim_}}, hyper_);
  detail::write_section(out, "actor", actor_.spec, actor_.params);
  detail::write_section(out, "actor_target", actor_.spec, actor_target_);
  detail::write_section(out, "critic1", critic1_.spec, critic1_.params);
  detail::write_section(out, "critic1_target", critic1_.spec, critic1_target_);
  detail::write_section(out, "critic2", critic2_.spec, critic2_.params);
  detail::write_section(out, "critic2_target", critic2_.spec, critic2_target_);
  if (!out) throw std::runtime_error("failed to write agent checkpoint");
}

Td3Agent Td3Agent::load(std::istream& in) {
  const auto h = detail::read_header(in, "td3");
  Td3Agent a;
  a.state_dim_ = h.dim("state");
  a.action_dim_ = h.dim("action");
  a.hyper_ = AgentHyperparams::from_map(h.hyper);
  detail::read_trainable(in, "actor", a.actor_, a.hyper_.lr_perturb);
  detail::read_target(in, "actor_target", a.actor_.spec, a.actor_target_);
  detail::read_trainable(in, "critic1", a.critic1_, a.hyper_.lr_critic);
  detail::read_target(in, "critic1_target", a.critic1_.spec, a.critic1_target_);
  detail::read_trainable(in, "critic2", a.critic2_, a.hyper_.lr_critic);
  detail::read_target(in, "critic2_target", a.critic2_.spec, a.critic2_target_);
  const int sa = a.state_dim_ + a.action_dim_;
  if (a.actor_.spec.input_size() != a.state_dim_ || a.actor_.spec.output_size() != a.action_dim_ ||
      a.critic1_.spec.input_size() != sa || a.critic2_.spec.input_size() != sa) {
    throw std::runtime_error("checkpoint: network shapes disagree with dims");
  }
  return a;
}

Td3Result train_td3(const TransitionDataset& dataset, const AgentHyperparams& hyper, Rng& rng,
                    const EpochObserver& observer) {
  if (dataset.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  dataset.validate();
  Td3Result result;
  result.agent = std::make_shared<Td3Agent>(dataset.meta.state_dim, dataset.meta.action_dim, hyper, rng);
  ReplayBuffer buffer(hyper.buffer_capacity, dataset.meta.state_dim, dataset.meta.action_dim);
  for (const auto& t : dataset.transitions) buffer.push(t);
  result.log.reserve(static_cast<std::size_t>(hyper.epochs));
  for (long epoch = 1; epoch <= hyper.epochs; ++epoch) {
    const Batch batch = sample_batch(buffer, hyper.batch_size, rng);
    result.log.push_back(result.agent->train_epoch(batch, epoch, rng));
    if (observer && !observer(result.log.back())) break;
  }
  return result;
}

}  // namespace mtf
