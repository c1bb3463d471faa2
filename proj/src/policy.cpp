#include "mtf/policy.hpp"

#include <stdexcept>

namespace mtf {

Eigen::MatrixXd Policy::act_batch(const Eigen::MatrixXd& states, Rng& rng) const {
  Eigen::MatrixXd out;
  for (Eigen::Index c = 0; c < states.cols(); ++c) {
    Vec a = act(states.col(c), rng).alpha;
    if (c == 0) out.resize(a.size(), states.cols());
    out.col(c) = a;
  }
  return out;
}

FusionAction RandomPolicy::act(const Vec&, Rng& rng) const {
  Vec a(action_dim_);
  for (int i = 0; i < action_dim_; ++i) a(i) = standard_normal(rng);
  return {clamp_unit(a)};
}

NoisyPolicy::NoisyPolicy(std::shared_ptr<const Policy> base, double sigma) : base_(std::move(base)), sigma_(sigma) {
  if (!base_) throw std::invalid_argument("action-noise policy needs a source policy");
  if (!(sigma >= 0.0)) throw std::invalid_argument("action-noise sigma must be non-negative");
}

FusionAction NoisyPolicy::act(const Vec& state, Rng& rng) const {
  Vec a = base_->act(state, rng).alpha;
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += sigma_ * standard_normal(rng);
  return {clamp_unit(a)};
}

}  // namespace mtf
