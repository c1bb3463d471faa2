#include "mtf/ope.hpp"

#include <cmath>
#include <random>

#include "mtf/agent.hpp"
#include "mtf/text.hpp"

namespace mtf {

using detail::stack;
using nn::Matrix;
using nn::Vector;

namespace {

double need_double(const std::string& key, const std::string& value) {
  auto v = text::parse_double(value);
  if (!v) throw std::invalid_argument("ope " + key + ": not a number: " + value);
  return *v;
}

long long need_int(const std::string& key, const std::string& value) {
  auto v = text::parse_int(value);
  if (!v) throw std::invalid_argument("ope " + key + ": not an integer: " + value);
  return *v;
}

struct Columns {
  Matrix states, actions, next_states;
  Vector rewards, not_done;
};

Columns columns_of(const TransitionDataset& d) {
  const auto n = static_cast<Eigen::Index>(d.size());
  Columns c;
  c.states.resize(d.meta.state_dim, n);
  c.actions.resize(d.meta.action_dim, n);
  c.next_states.resize(d.meta.state_dim, n);
  c.rewards.resize(n);
  c.not_done.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = d.transitions[static_cast<std::size_t>(i)];
    c.states.col(i) = t.state;
    c.actions.col(i) = t.action;
    c.next_states.col(i) = t.next_state;
    c.rewards(i) = t.reward;
    c.not_done(i) = t.done ? 0.0 : 1.0;
  }
  return c;
}

Matrix gather(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(idx[j]);
  return out;
}

Vector gather(const Vector& v, const std::vector<Eigen::Index>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out(static_cast<Eigen::Index>(j)) = v(idx[j]);
  return out;
}

Matrix stack_states(const std::vector<Vec>& states) {
  Matrix m(states.front().size(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = states[i];
  return m;
}

}  // namespace

void OpeConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid ope config: " + what); };
  if (train_batch < 1 || test_batch < 1 || iterations < 1) fail("m, n and K must be >= 1");
  if (!(cql_penalty >= 0.0)) fail("cql_penalty must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must be in [0, 1]");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (hidden.empty()) fail("hidden must list at least one layer");
  for (int h : hidden)
    if (h < 1) fail("hidden sizes must be >= 1");
}

std::map<std::string, std::string> OpeConfig::to_map() const {
  std::string hs;
  for (std::size_t i = 0; i < hidden.size(); ++i) hs += (i ? "," : "") + std::to_string(hidden[i]);
  return {{"train_batch", std::to_string(train_batch)},
          {"test_batch", std::to_string(test_batch)},
          {"gamma", text::format_double(gamma)},
          {"cql_penalty", text::format_double(cql_penalty)},
          {"iterations", std::to_string(iterations)},
          {"learning_rate", text::format_double(learning_rate)},
          {"hidden", hs}};
}

OpeConfig OpeConfig::from_map(const std::map<std::string, std::string>& values) {
  OpeConfig c;
  for (const auto& [key, value] : values) {
    if (key == "train_batch") c.train_batch = static_cast<int>(need_int(key, value));
    else if (key == "test_batch") c.test_batch = static_cast<int>(need_int(key, value));
    else if (key == "gamma") c.gamma = need_double(key, value);
    else if (key == "cql_penalty") c.cql_penalty = need_double(key, value);
    else if (key == "iterations") c.iterations = static_cast<long>(need_int(key, value));
    else if (key == "learning_rate") c.learning_rate = need_double(key, value);
    else if (key == "hidden") {
      c.hidden.clear();
      for (auto tok : text::split(value, ',')) {
        auto v = text::parse_int(text::trim(tok));
        if (!v) throw std::invalid_argument("ope hidden: bad size list: " + value);
        c.hidden.push_back(static_cast<int>(*v));
      }
    } else {
      throw std::invalid_argument("unknown ope setting: " + key);
    }
  }
  c.validate();
  return c;
}

Matrix FittedQ::standardize(const Matrix& inputs) const {
  return ((inputs.colwise() - input_mean).array().colwise() * input_scale.array()).matrix();
}

Matrix FittedQ::operator()(const Matrix& states, const Matrix& actions) const {
  return nn::forward_batch(params, spec, standardize(stack(states, actions)));
}

OpeDivergence::OpeDivergence(long iteration, const std::string& what)
    : std::runtime_error("ope diverged at iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}

OpeFit fit_conservative_q(const TransitionDataset& dataset, const Policy& policy, const OpeConfig& config, Rng& rng) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("ope: empty dataset");
  const Columns data = columns_of(dataset);
  const Matrix pi_states = policy.act_batch(data.states, rng);
  const Matrix pi_next = policy.act_batch(data.next_states, rng);

  nn::Trainable q(nn::NetworkSpec::mlp(dataset.meta.state_dim + dataset.meta.action_dim, config.hidden, 1,
                                       nn::Activation::linear),
                  config.learning_rate, rng);
  OpeFit fit;
  fit.q.spec = q.spec;
  fit.q.policy = policy.name();
  {
    const Matrix x = stack(data.states, data.actions);
    fit.q.input_mean = x.rowwise().mean();
    const Vector sd = ((x.colwise() - fit.q.input_mean).array().square().rowwise().mean()).sqrt().matrix();
    fit.q.input_scale = sd.unaryExpr([](double v) { return v > 1e-8 ? 1.0 / v : 1.0; });
  }
  auto qx = [&](const Matrix& x) { return fit.q.standardize(x); };
  fit.loss.reserve(static_cast<std::size_t>(config.iterations));

  const int m = config.train_batch;
  const double inv = 1.0 / m;
  std::uniform_int_distribution<Eigen::Index> pick(0, data.states.cols() - 1);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
  for (long it = 0; it < config.iterations; ++it) {
    for (auto& i : idx) i = pick(rng);
    const Matrix s = gather(data.states, idx);
    const Matrix a = gather(data.actions, idx);
    const Vector r = gather(data.rewards, idx);
    const Vector nd = gather(data.not_done, idx);

    // Targets use the current network with no gradient path.
    const Vector next_q = q(qx(stack(gather(data.next_states, idx), gather(pi_next, idx)))).row(0).transpose();
    const Vector y = r + config.gamma * nd.cwiseProduct(next_q);

    // Columns [0, m) are (s, pi(s)), [m, 2m) are (s, a).
    Matrix input(s.rows() + a.rows(), 2 * m);
    input.leftCols(m) = stack(s, gather(pi_states, idx));
    input.rightCols(m) = stack(s, a);
    nn::ForwardCache cache;
    const Matrix out = q(qx(input), cache);
    const Vector q_pi = out.row(0).head(m).transpose();
    const Vector q_data = out.row(0).tail(m).transpose();
    const Vector err = q_data - y;
    const double loss = config.cql_penalty * (q_pi.mean() - q_data.mean()) + 0.5 * err.squaredNorm() * inv;
    if (!std::isfinite(loss)) throw OpeDivergence(it, "non-finite loss");
    fit.loss.push_back(loss);

    Matrix adj(1, 2 * m);
    adj.leftCols(m).setConstant(config.cql_penalty * inv);
    adj.rightCols(m) = (inv * err.array() - config.cql_penalty * inv).matrix().transpose();
    try {
      q.step(q.backward(cache, adj).params);
    } catch (const std::invalid_argument& e) {
      throw OpeDivergence(it, e.what());
    }
  }
  fit.q.params = std::move(q.params);
  return fit;
}

double estimate_value(const FittedQ& q, const Matrix& initial_states, const Matrix& initial_actions) {
  if (initial_states.cols() == 0) throw std::invalid_argument("ope: no initial states");
  return q(initial_states, initial_actions).mean();
}

double estimate_value(const FittedQ& q, const std::vector<Vec>& initial_states, const Policy& policy, int test_batch,
                      Rng& rng) {
  if (initial_states.empty()) throw std::invalid_argument("ope: no initial states");
  if (test_batch < 1) throw std::invalid_argument("ope: test batch must be >= 1");
  Matrix states;
  if (initial_states.size() <= static_cast<std::size_t>(test_batch)) {
    states = stack_states(initial_states);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, initial_states.size() - 1);
    states.resize(initial_states.front().size(), test_batch);
    for (int i = 0; i < test_batch; ++i) states.col(i) = initial_states[pick(rng)];
  }
  return estimate_value(q, states, policy.act_batch(states, rng));
}

std::map<std::string, std::string> EvalReport::to_map() const {
  std::map<std::string, std::string> m{{"policy", policy},
                                       {"estimate", text::format_double(estimate)},
                                       {"final_loss", text::format_double(final_loss)},
                                       {"transitions", std::to_string(transitions)},
                                       {"initial_states", std::to_string(initial_states)}};
  if (mc_value) m["mc_value"] = text::format_double(*mc_value);
  if (gap) m["gap"] = text::format_double(*gap);
  return m;
}

EvalReport evaluate_policy(const TransitionDataset& test_dataset, const Policy& policy, const OpeConfig& config,
                           Rng& rng, const std::optional<McOracle>& oracle) {
  OpeFit fit = fit_conservative_q(test_dataset, policy, config, rng);
  const auto starts = test_dataset.initial_states();
  EvalReport report;
  report.policy = policy.name();
  report.estimate = estimate_value(fit.q, starts, policy, config.test_batch, rng);
  report.final_loss = fit.loss.back();
  report.transitions = test_dataset.size();
  report.initial_states = starts.size();
  if (oracle) {
    if (!oracle->sim) throw std::invalid_argument("ope: oracle without a simulator");
    report.mc_value = oracle->sim->mc_value(policy, oracle->sessions, oracle->seed, config.gamma);
    report.gap = report.estimate - *report.mc_value;
  }
  return report;
}

std::shared_ptr<BehaviorClonePolicy> train_behavior_clone(const TransitionDataset& dataset, const CloneConfig& config,
                                                          Rng& rng) {
  if (dataset.empty()) throw std::invalid_argument("behavior clone: empty dataset");
  if (config.batch_size < 1 || config.epochs < 0) throw std::invalid_argument("behavior clone: bad config");
  const Columns data = columns_of(dataset);
  nn::Trainable net(nn::NetworkSpec::mlp(dataset.meta.state_dim, config.hidden, dataset.meta.action_dim,
                                         nn::Activation::tanh),
                    config.learning_rate, rng);
  std::uniform_int_distribution<Eigen::Index> pick(0, data.states.cols() - 1);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(config.batch_size));
  const double inv = 1.0 / config.batch_size;
  for (long e = 0; e < config.epochs; ++e) {
    for (auto& i : idx) i = pick(rng);
    nn::ForwardCache cache;
    const Matrix pred = net(gather(data.states, idx), cache);
    net.step(net.backward(cache, 2.0 * inv * (pred - gather(data.actions, idx))).params);
  }
  return std::make_shared<BehaviorClonePolicy>(net.spec, net.params);
}

}  // namespace mtf
