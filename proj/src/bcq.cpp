#include "mtf/bcq.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mtf/text.hpp"

namespace mtf {

using detail::stack;
using nn::Matrix;
using nn::Vector;

double gaussian_kl(const Vector& mu, const Vector& logstd) {
  if (mu.size() != logstd.size()) throw std::invalid_argument("gaussian_kl: size mismatch");
  return 0.5 * (mu.array().square() + (2.0 * logstd.array()).exp() - 1.0 - 2.0 * logstd.array()).sum();
}

double clipped_double_q_target(double reward, bool done, double gamma, const Vector& q1, const Vector& q2) {
  if (q1.size() == 0 || q1.size() != q2.size()) throw std::invalid_argument("clipped_double_q_target: bad candidate set");
  if (done) return reward;
  return reward + gamma * q1.cwiseMin(q2).maxCoeff();
}

BcqAgent::BcqAgent(int state_dim, int action_dim, AgentHyperparams hyper, Rng& rng)
    : state_dim_(state_dim), action_dim_(action_dim), hyper_(std::move(hyper)) {
  if (state_dim < 1 || action_dim < 1) throw std::invalid_argument("BCQ agent needs positive state and action sizes");
  hyper_.validate();
  latent_dim_ = hyper_.latent_dim > 0 ? hyper_.latent_dim : 2 * action_dim;
  using nn::Activation;
  using nn::NetworkSpec;
  const auto& h = hyper_.hidden;
  encoder_ = nn::Trainable(NetworkSpec::mlp(state_dim + action_dim, h, 2 * latent_dim_, Activation::linear),
                           hyper_.lr_generator, rng);
  decoder_ = nn::Trainable(NetworkSpec::mlp(state_dim + latent_dim_, h, action_dim, Activation::tanh),
                           hyper_.lr_generator, rng);
  perturb_ = nn::Trainable(NetworkSpec::mlp(state_dim + action_dim, h, action_dim, Activation::tanh),
                           hyper_.lr_perturb, rng);
  critic1_ = nn::Trainable(NetworkSpec::mlp(state_dim + action_dim, h, 1, Activation::linear), hyper_.lr_critic, rng);
  critic2_ = nn::Trainable(NetworkSpec::mlp(state_dim + action_dim, h, 1, Activation::linear), hyper_.lr_critic, rng);
  perturb_target_ = perturb_.params;
  critic1_target_ = critic1_.params;
  critic2_target_ = critic2_.params;
}

VaeLoss BcqAgent::vae_loss(const Matrix& states, const Matrix& actions, const Matrix& noise,
                           nn::NetworkParams* encoder_grads, nn::NetworkParams* decoder_grads) const {
  const Eigen::Index batch = states.cols();
  if (batch == 0 || actions.cols() != batch || noise.cols() != batch || noise.rows() != latent_dim_ ||
      states.rows() != state_dim_ || actions.rows() != action_dim_) {
    throw std::invalid_argument("vae_loss: batch shape mismatch");
  }
  const double inv = 1.0 / static_cast<double>(batch);

  nn::ForwardCache enc_cache;
  const Matrix enc_out = encoder_(stack(states, actions), enc_cache);
  const Matrix mu = enc_out.topRows(latent_dim_);
  const Matrix raw = enc_out.bottomRows(latent_dim_);
  const Matrix logstd = raw.cwiseMax(logstd_min).cwiseMin(logstd_max);
  const Matrix sd = logstd.array().exp().matrix();
  const Matrix z = mu + sd.cwiseProduct(noise);

  nn::ForwardCache dec_cache;
  const Matrix recon = decoder_(stack(states, z), dec_cache);
  const Matrix diff = recon - actions;

  VaeLoss loss;
  loss.reconstruction = diff.squaredNorm() * inv;
  loss.kl = 0.5 * (mu.array().square() + sd.array().square() - 1.0 - 2.0 * logstd.array()).sum() * inv;
  loss.total = loss.reconstruction + loss.kl;

  if (encoder_grads || decoder_grads) {
    nn::Gradients dg = decoder_.backward(dec_cache, 2.0 * inv * diff);
    const Matrix gz = dg.input.bottomRows(latent_dim_);
    Matrix d_mu = gz + inv * mu;
    Matrix d_log = gz.cwiseProduct(noise).cwiseProduct(sd) + inv * (sd.array().square() - 1.0).matrix();
    for (Eigen::Index c = 0; c < batch; ++c)
      for (Eigen::Index r = 0; r < latent_dim_; ++r)
        if (raw(r, c) < logstd_min || raw(r, c) > logstd_max) d_log(r, c) = 0.0;
    if (decoder_grads) *decoder_grads = std::move(dg.params);
    if (encoder_grads) *encoder_grads = encoder_.backward(enc_cache, stack(d_mu, d_log)).params;
  }
  return loss;
}

VaeLoss BcqAgent::vae_update(const Batch& batch, Rng& rng) {
  const Matrix noise = detail::standard_normal_matrix(latent_dim_, batch.size(), rng);
  nn::NetworkParams ge, gd;
  VaeLoss loss = vae_loss(batch.states, batch.actions, noise, &ge, &gd);
  encoder_.step(ge);
  decoder_.step(gd);
  return loss;
}

Matrix BcqAgent::decode_samples(const Matrix& states, Rng& rng) const {
  const double clip = hyper_.latent_clip;
  Matrix z = detail::standard_normal_matrix(latent_dim_, states.cols(), rng).cwiseMax(-clip).cwiseMin(clip);
  return decoder_(stack(states, z));
}

Matrix BcqAgent::sample_actions(const Vec& state, int n, Rng& rng) const {
  if (state.size() != state_dim_) throw std::invalid_argument("sample_actions: state size mismatch");
  if (n < 1) throw std::invalid_argument("sample_actions: n must be >= 1");
  return decode_samples(state.replicate(1, n), rng);
}

Matrix BcqAgent::perturb(const Matrix& states, const Matrix& actions, bool use_target) const {
  const auto& params = use_target ? perturb_target_ : perturb_.params;
  const Matrix xi = hyper_.rho * nn::forward_batch(params, perturb_.spec, stack(states, actions));
  return detail::clamp_unit(actions + xi);
}

Matrix BcqAgent::q1(const Matrix& states, const Matrix& actions, bool use_target) const {
  return nn::forward_batch(use_target ? critic1_target_ : critic1_.params, critic1_.spec, stack(states, actions));
}

Matrix BcqAgent::q2(const Matrix& states, const Matrix& actions, bool use_target) const {
  return nn::forward_batch(use_target ? critic2_target_ : critic2_.params, critic2_.spec, stack(states, actions));
}

ActionChoice BcqAgent::select_action(const Vec& state, Rng& rng) const {
  const int n = hyper_.sampled_actions;
  const Matrix states = state.replicate(1, n);
  const Matrix candidates = sample_actions(state, n, rng);
  const Matrix perturbed = perturb(states, candidates);
  const Matrix q = q1(states, perturbed);
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < n; ++j)
    if (q(0, j) > q(0, best)) best = j;
  return {perturbed.col(best), candidates.col(best), static_cast<int>(best)};
}

Matrix BcqAgent::select_actions(const Matrix& states, Rng& rng) const {
  const int n = hyper_.sampled_actions;
  const Matrix rep = detail::repeat_columns(states, n);
  const Matrix perturbed = perturb(rep, decode_samples(rep, rng));
  const Matrix q = q1(rep, perturbed);
  Matrix out(action_dim_, states.cols());
  for (Eigen::Index i = 0; i < states.cols(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < n; ++j)
      if (q(0, i * n + j) > q(0, i * n + best)) best = j;
    out.col(i) = perturbed.col(i * n + best);
  }
  return out;
}

Vector BcqAgent::critic_target(const Batch& batch, Rng& rng) const {
  const int n = hyper_.sampled_actions;
  const Matrix rep = detail::repeat_columns(batch.next_states, n);
  const Matrix next_actions = perturb(rep, decode_samples(rep, rng), true);
  const Matrix t1 = q1(rep, next_actions, true);
  const Matrix t2 = q2(rep, next_actions, true);
  Vector y(batch.size());
  for (int i = 0; i < batch.size(); ++i) {
    y(i) = clipped_double_q_target(batch.rewards(i), batch.not_done(i) == 0.0, hyper_.gamma,
                                   t1.row(0).segment(i * n, n).transpose(), t2.row(0).segment(i * n, n).transpose());
  }
  return y;
}

double BcqAgent::critic_loss(int which, const Batch& batch, const Vector& targets, nn::NetworkParams* grads) const {
  if (which != 1 && which != 2) throw std::invalid_argument("critic_loss: critic index must be 1 or 2");
  if (targets.size() != batch.size()) throw std::invalid_argument("critic_loss: target count mismatch");
  const nn::Trainable& critic = which == 1 ? critic1_ : critic2_;
  const double inv = 1.0 / static_cast<double>(batch.size());
  nn::ForwardCache cache;
  const Matrix err = critic(stack(batch.states, batch.actions), cache) - targets.transpose();
  if (grads) *grads = critic.backward(cache, 2.0 * inv * err).params;
  return err.squaredNorm() * inv;
}

double BcqAgent::critic_regression(const Batch& batch, const Vector& targets) {
  nn::NetworkParams g1, g2;
  const double l1 = critic_loss(1, batch, targets, &g1);
  const double l2 = critic_loss(2, batch, targets, &g2);
  critic1_.step(g1);
  critic2_.step(g2);
  return 0.5 * (l1 + l2);
}

double BcqAgent::perturbation_objective(const Matrix& states, const Matrix& candidates,
                                        nn::NetworkParams* loss_grads) const {
  const Eigen::Index batch = states.cols();
  if (batch == 0 || candidates.cols() != batch) throw std::invalid_argument("perturbation_objective: shape mismatch");
  const double inv = 1.0 / static_cast<double>(batch);
  nn::ForwardCache p_cache;
  const Matrix psi = perturb_(stack(states, candidates), p_cache);
  const Matrix raw = candidates + hyper_.rho * psi;
  const Matrix acted = detail::clamp_unit(raw);

  nn::ForwardCache q_cache;
  const Matrix q = critic1_(stack(states, acted), q_cache);
  if (loss_grads) {
    const Matrix q_adj = Matrix::Constant(1, batch, -inv);
    Matrix d_act = critic1_.backward(q_cache, q_adj).input.bottomRows(action_dim_);
    for (Eigen::Index c = 0; c < d_act.cols(); ++c)
      for (Eigen::Index r = 0; r < d_act.rows(); ++r)
        if (std::abs(raw(r, c)) > 1.0) d_act(r, c) = 0.0;
    *loss_grads = perturb_.backward(p_cache, hyper_.rho * d_act).params;
  }
  return q.sum() * inv;
}

double BcqAgent::perturbation_update(const Batch& batch, Rng& rng) {
  nn::NetworkParams grads;
  const double objective = perturbation_objective(batch.states, decode_samples(batch.states, rng), &grads);
  perturb_.step(grads);
  return objective;
}

void BcqAgent::soft_update_targets() {
  nn::soft_update(perturb_target_, perturb_.params, hyper_.target_rate);
  nn::soft_update(critic1_target_, critic1_.params, hyper_.target_rate);
  nn::soft_update(critic2_target_, critic2_.params, hyper_.target_rate);
}

EpochLog BcqAgent::train_epoch(const Batch& batch, long epoch, Rng& rng) {
  EpochLog log;
  log.epoch = epoch;
  log.generator_loss = vae_update(batch, rng).total;
  const Vector y = critic_target(batch, rng);
  log.actor_objective = perturbation_update(batch, rng);
  log.mean_q = log.actor_objective;
  log.critic_loss = critic_regression(batch, y);
  if (epoch % hyper_.target_every == 0) soft_update_targets();
  return log;
}

bool BcqAgent::all_finite() const {
  return encoder_.params.all_finite() && decoder_.params.all_finite() && perturb_.params.all_finite() &&
         critic1_.params.all_finite() && critic2_.params.all_finite() && perturb_target_.all_finite() &&
         critic1_target_.all_finite() && critic2_target_.all_finite();
}

void BcqAgent::save(std::ostream& out) const {
  detail::write_header(out, "bcq", {{"state", state_dim_}, {"action", action_dim_}, {"latent", latent_dim_}}, hyper_);
  detail::write_section(out, "encoder", encoder_.spec, encoder_.params);
  detail::write_section(out, "decoder", decoder_.spec, decoder_.params);
  detail::write_section(out, "perturbation", perturb_.spec, perturb_.params);
  detail::write_section(out, "perturbation_target", perturb_.spec, perturb_target_);
  detail::write_section(out, "critic1", critic1_.spec, critic1_.params);
  detail::write_section(out, "critic1_target", critic1_.spec, critic1_target_);
  detail::write_section(out, "critic2", critic2_.spec, critic2_.params);
  detail::write_section(out, "critic2_target", critic2_.spec, critic2_target_);
  if (!out) throw std::runtime_error("failed to write agent checkpoint");
}


BcqAgent BcqAgent::load(std::istream& in) {
  const auto h = detail::read_header(in, "bcq");
  BcqAgent a;
  a.state_dim_ = h.dim("state");
  a.action_dim_ = h.dim("action");
  a.latent_dim_ = h.dim("latent");
  a.hyper_ = AgentHyperparams::from_map(h.hyper);
  detail::read_trainable(in, "encoder", a.encoder_, a.hyper_.lr_generator);
  detail::read_trainable(in, "decoder", a.decoder_, a.hyper_.lr_generator);
  detail::read_trainable(in, "perturbation", a.perturb_, a.hyper_.lr_perturb);
  detail::read_target(in, "perturbation_target", a.perturb_.spec, a.perturb_target_);
  detail::read_trainable(in, "critic1", a.critic1_, a.hyper_.lr_critic);
  detail::read_target(in, "critic1_target", a.critic1_.spec, a.critic1_target_);
  detail::read_trainable(in, "critic2", a.critic2_, a.hyper_.lr_critic);
  detail::read_target(in, "critic2_target", a.critic2_.spec, a.critic2_target_);
  const int sa = a.state_dim_ + a.action_dim_;
  if (a.encoder_.spec.input_size() != sa || a.encoder_.spec.output_size() != 2 * a.latent_dim_ ||
      a.decoder_.spec.input_size() != a.state_dim_ + a.latent_dim_ || a.decoder_.spec.output_size() != a.action_dim_ ||
      a.perturb_.spec.input_size() != sa || a.perturb_.spec.output_size() != a.action_dim_ ||
      a.critic1_.spec.input_size() != sa || a.critic2_.spec.input_size() != sa) {
    throw std::runtime_error("checkpoint: network shapes disagree with dims");
  }
  return a;
}

BcqResult train_bcq(const TransitionDataset& dataset, const AgentHyperparams& hyper, Rng& rng,
                    const EpochObserver& observer) {
  if (dataset.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  dataset.validate();
  BcqResult result;
  result.agent = std::make_shared<BcqAgent>(dataset.meta.state_dim, dataset.meta.action_dim, hyper, rng);
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
