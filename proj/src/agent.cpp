#include "mtf/agent.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mtf/text.hpp"

namespace mtf {

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

double need_double(const std::string& key, const std::string& value) {
  auto v = text::parse_double(value);
  if (!v) throw std::invalid_argument("hyperparameter " + key + ": not a number: " + value);
  return *v;
}

long long need_int(const std::string& key, const std::string& value) {
  auto v = text::parse_int(value);
  if (!v) throw std::invalid_argument("hyperparameter " + key + ": not an integer: " + value);
  return *v;
}

}  // namespace

void AgentHyperparams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid hyperparameter: " + what); };
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must be in [0, 1]");
  if (!(rho >= 0.0)) fail("rho must be non-negative");
  if (sampled_actions < 1) fail("sampled_actions must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (target_every < 1) fail("target_every must be >= 1");
  if (!(target_rate > 0.0 && target_rate <= 1.0)) fail("target_rate must be in (0, 1]");
  if (epochs < 0) fail("epochs must be non-negative");
  if (!(lr_generator > 0.0) || !(lr_perturb > 0.0) || !(lr_critic > 0.0)) fail("learning rates must be positive");
  if (latent_dim < 0) fail("latent_dim must be non-negative");
  if (!(latent_clip > 0.0)) fail("latent_clip must be positive");
  if (hidden.empty()) fail("hidden must list at least one layer");
  for (int h : hidden)
    if (h < 1) fail("hidden sizes must be >= 1");
  if (buffer_capacity < 1) fail("buffer_capacity must be >= 1");
  if (policy_delay < 1) fail("policy_delay must be >= 1");
  if (!(target_noise >= 0.0) || !(target_noise_clip >= 0.0)) fail("target noise must be non-negative");
}

std::map<std::string, std::string> AgentHyperparams::to_map() const {
  using text::format_double;
  return {
      {"gamma", format_double(gamma)},
      {"rho", format_double(rho)},
      {"sampled_actions", std::to_string(sampled_actions)},
      {"batch_size", std::to_string(batch_size)},
      {"target_every", std::to_string(target_every)},
      {"target_rate", format_double(target_rate)},
      {"epochs", std::to_string(epochs)},
      {"lr_generator", format_double(lr_generator)},
      {"lr_perturb", format_double(lr_perturb)},
      {"lr_critic", format_double(lr_critic)},
      {"latent_dim", std::to_string(latent_dim)},
      {"latent_clip", format_double(latent_clip)},
      {"hidden", join_ints(hidden)},
      {"buffer_capacity", std::to_string(buffer_capacity)},
      {"policy_delay", std::to_string(policy_delay)},
      {"target_noise", format_double(target_noise)},
      {"target_noise_clip", format_double(target_noise_clip)},
  };
}

AgentHyperparams AgentHyperparams::from_map(const std::map<std::string, std::string>& values) {
  AgentHyperparams h;
  for (const auto& [key, value] : values) {
    if (key == "gamma") h.gamma = need_double(key, value);
    else if (key == "rho") h.rho = need_double(key, value);
    else if (key == "sampled_actions") h.sampled_actions = static_cast<int>(need_int(key, value));
    else if (key == "batch_size") h.batch_size = static_cast<int>(need_int(key, value));
    else if (key == "target_every") h.target_every = static_cast<int>(need_int(key, value));
    else if (key == "target_rate") h.target_rate = need_double(key, value);
    else if (key == "epochs") h.epochs = static_cast<long>(need_int(key, value));
    else if (key == "lr_generator") h.lr_generator = need_double(key, value);
    else if (key == "lr_perturb") h.lr_perturb = need_double(key, value);
    else if (key == "lr_critic") h.lr_critic = need_double(key, value);
    else if (key == "latent_dim") h.latent_dim = static_cast<int>(need_int(key, value));
    else if (key == "latent_clip") h.latent_clip = need_double(key, value);
    else if (key == "hidden") {
      h.hidden.clear();
      for (auto tok : text::split(value, ',')) {
        auto v = text::parse_int(text::trim(tok));
        if (!v) throw std::invalid_argument("hyperparameter hidden: bad size list: " + value);
        h.hidden.push_back(static_cast<int>(*v));
      }
    } else if (key == "buffer_capacity") {
      auto v = need_int(key, value);
      if (v < 1) throw std::invalid_argument("hyperparameter buffer_capacity must be >= 1");
      h.buffer_capacity = static_cast<std::size_t>(v);
    } else if (key == "policy_delay") h.policy_delay = static_cast<int>(need_int(key, value));
    else if (key == "target_noise") h.target_noise = need_double(key, value);
    else if (key == "target_noise_clip") h.target_noise_clip = need_double(key, value);
    else throw std::invalid_argument("unknown hyperparameter: " + key);
  }
  h.validate();
  return h;
}

void write_training_log(std::ostream& out, const TrainingLog& log) {
  out << "epoch,mean_q,generator_loss,actor_objective,critic_loss\n";
  std::string line;
  for (const auto& e : log) {
    line = std::to_string(e.epoch);
    for (double v : {e.mean_q, e.generator_loss, e.actor_objective, e.critic_loss}) {
      line += ',';
      text::append_double(line, v);
    }
    line += '\n';
    out << line;
  }
}

TrainingLog read_training_log(std::istream& in) {
  TrainingLog log;
  std::string line;
  if (!std::getline(in, line)) return log;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    auto f = text::split(line, ',');
    if (f.size() != 5) throw std::runtime_error("training log line " + std::to_string(lineno) + ": expected 5 fields");
    EpochLog e;
    auto ep = text::parse_int(f[0]);
    auto q = text::parse_double(f[1]);
    auto g = text::parse_double(f[2]);
    auto a = text::parse_double(f[3]);
    auto c = text::parse_double(f[4]);
    if (!ep || !q || !g || !a || !c) throw std::runtime_error("training log line " + std::to_string(lineno) + ": bad value");
    e.epoch = static_cast<long>(*ep);
    e.mean_q = *q;
    e.generator_loss = *g;
    e.actor_objective = *a;
    e.critic_loss = *c;
    log.push_back(e);
  }
  return log;
}

namespace detail {

nn::Matrix stack(const nn::Matrix& top, const nn::Matrix& bottom) {
  if (top.cols() != bottom.cols()) throw std::invalid_argument("stack: column counts differ");
  nn::Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

nn::Matrix repeat_columns(const nn::Matrix& m, int times) {
  nn::Matrix out(m.rows(), m.cols() * times);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (int t = 0; t < times; ++t) out.col(c * times + t) = m.col(c);
  return out;
}

nn::Matrix clamp_unit(const nn::Matrix& m) { return m.cwiseMax(-1.0).cwiseMin(1.0); }

nn::Matrix standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  nn::Matrix out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = standard_normal(rng);
  return out;
}

void write_section(std::ostream& out, const std::string& name, const nn::NetworkSpec& spec,
                   const nn::NetworkParams& params) {
  out << "section " << name << '\n';
  nn::write_network(out, spec, params);
}

void read_section(std::istream& in, const std::string& name, nn::NetworkSpec& spec, nn::NetworkParams& params) {
  std::string line;
  while (std::getline(in, line) && text::trim(line).empty()) {
  }
  if (line != "section " + name) throw std::runtime_error("checkpoint: expected section " + name + ", got '" + line + "'");
  nn::read_network(in, spec, params);
}

int CheckpointHeader::dim(const std::string& key) const {
  auto it = dims.find(key);
  if (it == dims.end() || it->second < 1) throw std::runtime_error("checkpoint: missing or invalid dim " + key);
  return it->second;
}

void write_header(std::ostream& out, const std::string& kind, const std::vector<std::pair<std::string, int>>& dims,
                  const AgentHyperparams& hyper) {
  out << "mtf-agent " << kind << "\ndims";
  for (const auto& [k, v] : dims) out << ' ' << k << '=' << v;
  out << '\n';
  for (const auto& [k, v] : hyper.to_map()) out << "hyper " << k << '=' << v << '\n';
}

CheckpointHeader read_header(std::istream& in, const std::string& kind) {
  std::string line;
  if (!std::getline(in, line) || line != "mtf-agent " + kind)
    throw std::runtime_error("checkpoint: not a " + kind + " agent");
  CheckpointHeader h;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint: missing dims");
  std::istringstream dims(line);
  std::string word;
  dims >> word;
  if (word != "dims") throw std::runtime_error("checkpoint: missing dims");
  while (dims >> word) {
    const auto eq = word.find('=');
    if (eq == std::string::npos) throw std::runtime_error("checkpoint: malformed dims");
    auto v = text::parse_int(word.substr(eq + 1));
    if (!v) throw std::runtime_error("checkpoint: malformed dims");
    h.dims[word.substr(0, eq)] = static_cast<int>(*v);
  }
  while (in.peek() == 'h') {
    std::getline(in, line);
    if (line.rfind("hyper ", 0) != 0) throw std::runtime_error("checkpoint: malformed hyperparameter line");
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("checkpoint: malformed hyperparameter line");
    h.hyper[line.substr(6, eq - 6)] = line.substr(eq + 1);
  }
  return h;
}

void read_trainable(std::istream& in, const std::string& name, nn::Trainable& t, double lr) {
  detail::read_section(in, name, t.spec, t.params);
  t.optimizer = nn::AdamState::for_params(t.spec, lr);
}

void read_target(std::istream& in, const std::string& name, const nn::NetworkSpec& expected, nn::NetworkParams& p) {
  nn::NetworkSpec spec;
  detail::read_section(in, name, spec, p);
  if (!(spec == expected)) throw std::runtime_error("checkpoint: " + name + " shape differs from its online network");
}


}  // namespace detail

}  // namespace mtf
