#pragma once

#include <memory>
#include <string>

#include "mtf/domain.hpp"
#include "mtf/rng.hpp"

namespace mtf {

// A state -> normalized fusion action map. Deterministic policies ignore `rng`.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual FusionAction act(const Vec& state, Rng& rng) const = 0;
  // One column per state. Must consume `rng` exactly as calling act() on
  // each column in order would.
  virtual Eigen::MatrixXd act_batch(const Eigen::MatrixXd& states, Rng& rng) const;
  virtual std::string name() const = 0;
  virtual bool deterministic() const { return true; }
};

// Standard normal per dimension, clamped to the action box.
class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(int action_dim) : action_dim_(action_dim) {}
  FusionAction act(const Vec& state, Rng& rng) const override;
  std::string name() const override { return "random"; }
  bool deterministic() const override { return false; }

 private:
  int action_dim_;
};

class ConstantPolicy final : public Policy {
 public:
  explicit ConstantPolicy(Vec action) : action_(clamp_unit(action)) {}
  FusionAction act(const Vec&, Rng&) const override { return {action_}; }
  std::string name() const override { return "constant"; }

 private:
  Vec action_;
};

// clamp(base(s) + eps, -1, 1), eps ~ N(0, sigma^2 I).
class NoisyPolicy final : public Policy {
 public:
  NoisyPolicy(std::shared_ptr<const Policy> base, double sigma);
  FusionAction act(const Vec& state, Rng& rng) const override;
  std::string name() const override { return "action_noise"; }
  bool deterministic() const override { return sigma_ == 0.0 && base_->deterministic(); }

 private:
  std::shared_ptr<const Policy> base_;
  double sigma_;
};

}  // namespace mtf
