#pragma once

// Transition datasets: persistence, time-ordered splitting, uniform minibatch
// sampling and the fixed-capacity replay buffer used during training.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mtf/domain.hpp"
#include "mtf/nn.hpp"
#include "mtf/rng.hpp"

namespace mtf {

struct DatasetMeta {
  int state_dim = 0;
  int action_dim = 0;
  int feedback_dim = 0;
  std::uint64_t seed = 0;
  std::string policy = "unknown";

  bool operator==(const DatasetMeta&) const = default;
};

struct TransitionDataset {
  DatasetMeta meta;
  std::vector<Transition> transitions;
  // Generating exploration mode per session, when known.
  std::map<std::uint64_t, std::string> session_modes;

  bool empty() const { return transitions.empty(); }
  std::size_t size() const { return transitions.size(); }
  // Index of the first transition of every session, in file order.
  std::vector<std::size_t> session_starts() const;
  std::size_t session_count() const { return session_starts().size(); }
  // Transitions whose step is 0, i.e. the initial state of each session.
  std::vector<Vec> initial_states() const;

  // Throws std::invalid_argument when dimensions disagree with `meta`, a
  // session is split into non-adjacent runs, steps are not consecutive, or
  // done is set before the last transition of a session.
  void validate() const;

  bool operator==(const TransitionDataset&) const = default;
};

class DatasetParseError : public std::runtime_error {
 public:
  DatasetParseError(std::size_t line, std::string field, const std::string& message);
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

// Tab-separated text. First line:
//   #fields session_id step state action reward next_state done
// then `#meta key=value ...` and `#mode <session_id> <tag>` lines, then one
// record per line with comma-separated vectors and done as 0/1.
void write_dataset(std::ostream& out, const TransitionDataset& dataset);
TransitionDataset read_dataset(std::istream& in);
void save(const TransitionDataset& dataset, const std::filesystem::path& path);
TransitionDataset load(const std::filesystem::path& path);

// First ceil(fraction * S) sessions go to train, the rest to test; train is
// clamped to [1, S - 1] so neither side is empty.
std::pair<TransitionDataset, TransitionDataset> time_split(const TransitionDataset& dataset, double fraction);

// Uniform with replacement.
std::vector<Transition> sample_minibatch(std::span<const Transition> source, int count, Rng& rng);

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int state_dim, int action_dim);

  // Evicts the oldest entry once at capacity.
  void push(Transition t);
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  const Transition& operator[](std::size_t i) const { return entries_[i]; }
  const std::deque<Transition>& entries() const { return entries_; }

  std::vector<Transition> sample(int count, Rng& rng) const;

 private:
  std::size_t capacity_;
  int state_dim_;
  int action_dim_;
  std::deque<Transition> entries_;
};

// Column-packed minibatch: one column per transition.
struct Batch {
  nn::Matrix states;
  nn::Matrix actions;
  nn::Vector rewards;
  nn::Matrix next_states;
  nn::Vector not_done;  // 1 - done

  int size() const { return static_cast<int>(rewards.size()); }
};

Batch pack(std::span<const Transition> transitions);
// Draws `count` indices uniformly with replacement and packs them.
Batch sample_batch(const ReplayBuffer& buffer, int count, Rng& rng);

}  // namespace mtf
