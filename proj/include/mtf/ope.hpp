#pragma once

// Conservative off-policy value estimation: fitted-Q evaluation with a CQL
// penalty that pushes down Q at the evaluated policy's actions relative to
// the logged ones, then the mean of Q(s0, pi(s0)) over initial states.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtf/datastore.hpp"
#include "mtf/nn.hpp"
#include "mtf/policy.hpp"
#include "mtf/simulator.hpp"

namespace mtf {

struct OpeConfig {
  int train_batch = 512;     // m
  int test_batch = 5000;     // n, initial states used for the estimate
  double gamma = 0.95;
  double cql_penalty = 5e-4;
  long iterations = 5000;    // K
  double learning_rate = 1e-4;
  std::vector<int> hidden = {64, 64};

  void validate() const;
  std::map<std::string, std::string> to_map() const;
  static OpeConfig from_map(const std::map<std::string, std::string>& values);
};

// Q over standardized inputs: the network sees (x - input_mean) * input_scale
// for x = s (+) a.
struct FittedQ {
  nn::NetworkSpec spec;
  nn::NetworkParams params;
  nn::Vector input_mean;
  nn::Vector input_scale;
  std::string policy;

  nn::Matrix standardize(const nn::Matrix& inputs) const;

  nn::Matrix operator()(const nn::Matrix& states, const nn::Matrix& actions) const;
};

class OpeDivergence : public std::runtime_error {
 public:
  OpeDivergence(long iteration, const std::string& what);
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

struct OpeFit {
  FittedQ q;
  std::vector<double> loss;  // per iteration
};

// The evaluated policy is queried once per dataset state and next state
// (stochastic policies draw from `rng`); those actions stay fixed during the
// fit. Throws OpeDivergence on a non-finite loss.
OpeFit fit_conservative_q(const TransitionDataset& dataset, const Policy& policy, const OpeConfig& config, Rng& rng);

// Mean of Q(s0, a0) over the columns.
double estimate_value(const FittedQ& q, const nn::Matrix& initial_states, const nn::Matrix& initial_actions);
// Uses every initial state when there are at most `test_batch` of them,
// otherwise `test_batch` drawn uniformly with replacement.
double estimate_value(const FittedQ& q, const std::vector<Vec>& initial_states, const Policy& policy, int test_batch,
                      Rng& rng);

struct McOracle {
  const Simulator* sim = nullptr;
  int sessions = 2000;
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::string policy;
  double estimate = 0.0;
  double final_loss = 0.0;
  std::size_t transitions = 0;
  std::size_t initial_states = 0;
  std::optional<double> mc_value;
  std::optional<double> gap;  // estimate - mc_value

  std::map<std::string, std::string> to_map() const;
};

EvalReport evaluate_policy(const TransitionDataset& test_dataset, const Policy& policy, const OpeConfig& config,
                           Rng& rng, const std::optional<McOracle>& oracle = std::nullopt);

// Deterministic tanh MLP regressed on the dataset's (state, action) pairs.
class BehaviorClonePolicy final : public Policy {
 public:
  BehaviorClonePolicy(nn::NetworkSpec spec, nn::NetworkParams params)
      : spec_(std::move(spec)), params_(std::move(params)) {}
  FusionAction act(const Vec& state, Rng&) const override { return {nn::forward(params_, spec_, state)}; }
  nn::Matrix act_batch(const nn::Matrix& states, Rng&) const override {
    return nn::forward_batch(params_, spec_, states);
  }
  std::string name() const override { return "behavior-clone"; }
  const nn::NetworkSpec& spec() const { return spec_; }
  const nn::NetworkParams& params() const { return params_; }

 private:
  nn::NetworkSpec spec_;
  nn::NetworkParams params_;
};

struct CloneConfig {
  std::vector<int> hidden = {64, 64};
  long epochs = 3000;
  int batch_size = 256;
  double learning_rate = 1e-3;
};

std::shared_ptr<BehaviorClonePolicy> train_behavior_clone(const TransitionDataset& dataset, const CloneConfig& config,
                                                          Rng& rng);

}  // namespace mtf
