#include "run_support.hpp"

#include <Eigen/Core>

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mtf/bcq.hpp"
#include "mtf/td3.hpp"
#include "mtf/text.hpp"

#ifndef MTF_VERSION
#define MTF_VERSION "dev"
#endif

namespace mtfrl {

namespace {

std::map<std::string, std::string> with_prefix(const std::string& prefix,
                                               const std::map<std::string, std::string>& values) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : values) out[prefix + k] = v;
  return out;
}

}  // namespace

mtf::CloneConfig clone_from_map(const std::map<std::string, std::string>& values) {
  mtf::CloneConfig c;
  for (const auto& [key, value] : values) {
    if (key == "hidden") {
      c.hidden.clear();
      for (auto tok : mtf::text::split(value, ',')) {
        auto v = mtf::text::parse_int(tok);
        if (!v || *v < 1) throw std::invalid_argument("clone.hidden: bad size list: " + value);
        c.hidden.push_back(static_cast<int>(*v));
      }
      continue;
    }
    if (key == "learning_rate") {
      auto v = mtf::text::parse_double(value);
      if (!v || !(*v > 0.0)) throw std::invalid_argument("clone.learning_rate must be > 0");
      c.learning_rate = *v;
      continue;
    }
    auto v = mtf::text::parse_int(value);
    if (key == "epochs") {
      if (!v || *v < 1) throw std::invalid_argument("clone.epochs must be >= 1");
      c.epochs = static_cast<long>(*v);
    } else if (key == "batch_size") {
      if (!v || *v < 1) throw std::invalid_argument("clone.batch_size must be >= 1");
      c.batch_size = static_cast<int>(*v);
    } else {
      throw std::invalid_argument("unknown clone key: " + key);
    }
  }
  return c;
}

std::map<std::string, std::string> clone_to_map(const mtf::CloneConfig& c) {
  std::string hidden;
  for (std::size_t i = 0; i < c.hidden.size(); ++i) hidden += (i ? "," : "") + std::to_string(c.hidden[i]);
  return {{"hidden", hidden},
          {"epochs", std::to_string(c.epochs)},
          {"batch_size", std::to_string(c.batch_size)},
          {"learning_rate", mtf::text::format_double(c.learning_rate)}};
}

RunConfig RunConfig::load(const std::string& path) {
  RunConfig rc;
  rc.sim.fill_defaults();
  if (path.empty()) return rc;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::map<std::string, std::map<std::string, std::string>> sections;
  for (const auto& [key, value] : mtf::text::read_config(in)) {
    const auto dot = key.find('.');
    const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    if (section != "sim" && section != "agent" && section != "ope" && section != "clone")
      throw std::invalid_argument("config key " + key + " needs a sim., agent., ope. or clone. prefix");
    sections[section][key.substr(dot + 1)] = value;
  }
  rc.sim = mtf::SimConfig::from_map(sections["sim"]);
  rc.agent = mtf::AgentHyperparams::from_map(sections["agent"]);
  rc.ope = mtf::OpeConfig::from_map(sections["ope"]);
  rc.clone = clone_from_map(sections["clone"]);
  rc.agent.validate();
  rc.ope.validate();
  return rc;
}

std::map<std::string, std::string> RunConfig::to_map() const {
  auto out = with_prefix("sim.", sim.to_map());
  out.merge(with_prefix("agent.", agent.to_map()));
  out.merge(with_prefix("ope.", ope.to_map()));
  out.merge(with_prefix("clone.", clone_to_map(clone)));
  return out;
}

std::string checkpoint_kind(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string line;
  std::getline(in, line);
  if (line == "mtf-agent bcq") return "bcq";
  if (line == "mtf-agent td3") return "td3";
  throw std::runtime_error(path.string() + " is not an agent checkpoint");
}

std::shared_ptr<const mtf::Policy> load_policy(const std::string& spec, int action_dim) {
  if (spec == "random") return std::make_shared<mtf::RandomPolicy>(action_dim);
  const std::string kind = checkpoint_kind(spec);
  std::ifstream in(spec);
  if (kind == "bcq") {
    auto agent = std::make_shared<mtf::BcqAgent>(mtf::BcqAgent::load(in));
    if (agent->action_dim() != action_dim) throw std::invalid_argument(spec + ": action dimension mismatch");
    return std::make_shared<mtf::BcqPolicy>(std::move(agent));
  }
  auto agent = std::make_shared<mtf::Td3Agent>(mtf::Td3Agent::load(in));
  if (agent->action_dim() != action_dim) throw std::invalid_argument(spec + ": action dimension mismatch");
  return std::make_shared<mtf::Td3Policy>(std::move(agent));
}

std::string policy_label(const std::string& spec) {
  if (spec == "random" || spec == "behavior-clone") return spec;
  return fs::path(spec).stem().string();
}

Manifest::Manifest(std::string command, int argc, char** argv) {
  entries_["command"] = std::move(command);
  std::string joined;
  for (int i = 0; i < argc; ++i) joined += (i ? " " : "") + std::string(argv[i]);
  entries_["argv"] = joined;
  entries_["version.mtfrl"] = MTF_VERSION;
  entries_["version.eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION);
#if defined(__VERSION__)
  entries_["version.compiler"] = __VERSION__;
#endif
  entries_["version.cxx"] = std::to_string(__cplusplus);
}

void Manifest::add_config(const RunConfig& config) {
  for (const auto& [k, v] : config.to_map()) entries_["config." + k] = v;
}

void Manifest::add_output(const fs::path& path) { entries_["output." + std::to_string(outputs_++)] = path.string(); }

void Manifest::write(const fs::path& path) const {
  std::ostringstream out;
  mtf::text::write_config(out, entries_);
  write_text(path, out.str());
}

fs::path manifest_path(const fs::path& output) {
  fs::path p = output;
  p += ".manifest";
  return p;
}

void write_text(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace mtfrl
