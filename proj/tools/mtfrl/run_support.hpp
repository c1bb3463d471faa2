#pragma once

// Shared plumbing for the mtfrl subcommands: prefixed config files, policy
// loading, manifests and small file helpers.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mtf/agent.hpp"
#include "mtf/ope.hpp"
#include "mtf/policy.hpp"
#include "mtf/simulator.hpp"

namespace mtfrl {

namespace fs = std::filesystem;

// Flat config with `sim.`, `agent.`, `ope.` and `clone.` key prefixes.
struct RunConfig {
  mtf::SimConfig sim;
  mtf::AgentHyperparams agent;
  mtf::OpeConfig ope;
  mtf::CloneConfig clone;

  static RunConfig load(const std::string& path);  // empty path -> defaults
  std::map<std::string, std::string> to_map() const;
};

mtf::CloneConfig clone_from_map(const std::map<std::string, std::string>& values);
std::map<std::string, std::string> clone_to_map(const mtf::CloneConfig& c);

// `bcq` or `td3` from the first checkpoint line.
std::string checkpoint_kind(const fs::path& path);

// "random" or a BCQ/TD3 checkpoint path.
std::shared_ptr<const mtf::Policy> load_policy(const std::string& spec, int action_dim);

// Key/value record of a run, written next to its primary output.
class Manifest {
 public:
  Manifest(std::string command, int argc, char** argv);
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  void set_seed(const std::string& key, std::uint64_t seed) { entries_["seed." + key] = std::to_string(seed); }
  void add_config(const RunConfig& config);
  void add_output(const fs::path& path);
  void write(const fs::path& path) const;

 private:
  std::map<std::string, std::string> entries_;
  int outputs_ = 0;
};

fs::path manifest_path(const fs::path& output);

void write_text(const fs::path& path, const std::string& contents);

std::string policy_label(const std::string& spec);

}  // namespace mtfrl
