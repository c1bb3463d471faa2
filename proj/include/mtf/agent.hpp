#pragma once

// Pieces shared by the offline learners: hyperparameters, per-epoch logs,
// and the agent checkpoint envelope.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mtf/nn.hpp"

namespace mtf {

struct AgentHyperparams {
  double gamma = 0.95;
  double rho = 0.15;           // perturbation bound
  int sampled_actions = 10;    // n
  int batch_size = 256;        // M
  int target_every = 10;       // L
  double target_rate = 0.05;   // eta_t
  long epochs = 50000;         // Ep
  double lr_generator = 1e-3;
  double lr_perturb = 1e-4;
  double lr_critic = 2e-4;
  int latent_dim = 0;          // 0 -> 2k
  double latent_clip = 0.5;
  std::vector<int> hidden = {128, 128};
  std::size_t buffer_capacity = 100000;

  // TD3 baseline only.
  int policy_delay = 2;
  double target_noise = 0.2;
  double target_noise_clip = 0.5;

  void validate() const;
  std::map<std::string, std::string> to_map() const;
  static AgentHyperparams from_map(const std::map<std::string, std::string>& values);
};

struct EpochLog {
  long epoch = 0;
  double mean_q = 0.0;           // mean Q1 at the learner's own actions on the minibatch
  double generator_loss = 0.0;   // VAE loss (BCQ) or 0 (TD3)
  double actor_objective = 0.0;  // perturbation / actor objective
  double critic_loss = 0.0;      // mean of the two critic losses

  bool operator==(const EpochLog&) const = default;
};

using TrainingLog = std::vector<EpochLog>;

// Called after every epoch; returning false stops training early.
using EpochObserver = std::function<bool(const EpochLog&)>;

void write_training_log(std::ostream& out, const TrainingLog& log);
TrainingLog read_training_log(std::istream& in);

namespace detail {

// Rows of `top` stacked over rows of `bottom`.
nn::Matrix stack(const nn::Matrix& top, const nn::Matrix& bottom);
// Each column repeated `times` times consecutively.
nn::Matrix repeat_columns(const nn::Matrix& m, int times);
nn::Matrix clamp_unit(const nn::Matrix& m);
nn::Matrix standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

void write_section(std::ostream& out, const std::string& name, const nn::NetworkSpec& spec,
                   const nn::NetworkParams& params);
void read_section(std::istream& in, const std::string& name, nn::NetworkSpec& spec, nn::NetworkParams& params);

// Checkpoint envelope: `mtf-agent <kind>`, a `dims k=v ...` line, then one
// `hyper key=value` line per hyperparameter.
struct CheckpointHeader {
  std::map<std::string, int> dims;
  std::map<std::string, std::string> hyper;
  int dim(const std::string& key) const;
};

void write_header(std::ostream& out, const std::string& kind, const std::vector<std::pair<std::string, int>>& dims,
                  const AgentHyperparams& hyper);
CheckpointHeader read_header(std::istream& in, const std::string& kind);
void read_trainable(std::istream& in, const std::string& name, nn::Trainable& t, double learning_rate);
void read_target(std::istream& in, const std::string& name, const nn::NetworkSpec& expected,
                 nn::NetworkParams& params);

}  // namespace detail

}  // namespace mtf
