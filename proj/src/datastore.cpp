#include "mtf/datastore.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mtf/text.hpp"

namespace mtf {

namespace {

constexpr const char* kFieldsHeader = "#fields session_id step state action reward next_state done";

void append_vec(std::string& line, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) line += ',';
    text::append_double(line, v(i));
  }
}

Vec parse_vec(std::string_view token, std::size_t line, const char* field) {
  if (token.empty()) return Vec();
  auto parts = text::split(token, ',');
  Vec v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto d = text::parse_double(parts[i]);
    if (!d) throw DatasetParseError(line, field, "bad decimal '" + std::string(parts[i]) + "'");
    v(static_cast<Eigen::Index>(i)) = *d;
  }
  return v;
}

}  // namespace

DatasetParseError::DatasetParseError(std::size_t line, std::string field, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", field " + field + ": " + message),
      line_(line),
      field_(std::move(field)) {}

std::vector<std::size_t> TransitionDataset::session_starts() const {
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    if (i == 0 || transitions[i].session_id != transitions[i - 1].session_id) starts.push_back(i);
  }
  return starts;
}

std::vector<Vec> TransitionDataset::initial_states() const {
  std::vector<Vec> out;
  for (const auto& t : transitions)
    if (t.step == 0) out.push_back(t.state);
  return out;
}

void TransitionDataset::validate() const {
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const Transition& t = transitions[i];
    const std::string where = "transition " + std::to_string(i);
    if (t.state.size() != meta.state_dim || t.next_state.size() != meta.state_dim) {
      throw std::invalid_argument(where + ": state dimension differs from dataset");
    }
    if (t.action.size() != meta.action_dim) throw std::invalid_argument(where + ": action dimension differs from dataset");
    if (!std::isfinite(t.reward)) throw std::invalid_argument(where + ": non-finite reward");
    const bool first = i == 0 || transitions[i - 1].session_id != t.session_id;
    if (first) {
      if (!seen.insert(t.session_id).second) {
        throw std::invalid_argument(where + ": session " + std::to_string(t.session_id) + " is not contiguous");
      }
    } else {
      if (t.step != transitions[i - 1].step + 1) throw std::invalid_argument(where + ": non-consecutive step");
      if (transitions[i - 1].done) throw std::invalid_argument(where + ": done set before the end of its session");
    }
  }
}

void write_dataset(std::ostream& out, const TransitionDataset& dataset) {
  out << kFieldsHeader << '\n';
  out << "#meta state_dim=" << dataset.meta.state_dim << " action_dim=" << dataset.meta.action_dim
      << " feedback_dim=" << dataset.meta.feedback_dim << " seed=" << dataset.meta.seed
      << " policy=" << dataset.meta.policy << '\n';
  for (const auto& [id, mode] : dataset.session_modes) out << "#mode " << id << ' ' << mode << '\n';
  std::string line;
  for (const auto& t : dataset.transitions) {
    line.clear();
    line += std::to_string(t.session_id);
    line += '\t';
    line += std::to_string(t.step);
    line += '\t';
    append_vec(line, t.state);
    line += '\t';
    append_vec(line, t.action);
    line += '\t';
    text::append_double(line, t.reward);
    line += '\t';
    append_vec(line, t.next_state);
    line += '\t';
    line += t.done ? '1' : '0';
    line += '\n';
    out << line;
  }
}

TransitionDataset read_dataset(std::istream& in) {
  TransitionDataset d;
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || text::trim(line) != kFieldsHeader) {
    throw DatasetParseError(1, "header", "expected '" + std::string(kFieldsHeader) + "'");
  }
  bool have_meta = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("#meta", 0) == 0) {
      for (auto tok : text::split(std::string_view(line).substr(5), ' ')) {
        if (tok.empty()) continue;
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos) throw DatasetParseError(lineno, "meta", "expected key=value");
        const auto key = tok.substr(0, eq);
        const auto value = tok.substr(eq + 1);
        auto as_int = [&] {
          auto v = text::parse_int(value);
          if (!v) throw DatasetParseError(lineno, std::string(key), "bad integer");
          return *v;
        };
        if (key == "state_dim") d.meta.state_dim = static_cast<int>(as_int());
        else if (key == "action_dim") d.meta.action_dim = static_cast<int>(as_int());
        else if (key == "feedback_dim") d.meta.feedback_dim = static_cast<int>(as_int());
        else if (key == "seed") d.meta.seed = static_cast<std::uint64_t>(std::stoull(std::string(value)));
        else if (key == "policy") d.meta.policy = std::string(value);
        else throw DatasetParseError(lineno, std::string(key), "unknown meta key");
      }
      have_meta = true;
      continue;
    }
    if (line.rfind("#mode", 0) == 0) {
      std::istringstream ss(line.substr(5));
      std::uint64_t id = 0;
      std::string mode;
      if (!(ss >> id >> mode)) throw DatasetParseError(lineno, "mode", "expected '<session_id> <tag>'");
      d.session_modes[id] = mode;
      continue;
    }
    if (line[0] == '#') throw DatasetParseError(lineno, "header", "unknown directive");

    auto f = text::split(line, '\t');
    if (f.size() != 7) {
      throw DatasetParseError(lineno, "record", "expected 7 tab-separated fields, got " + std::to_string(f.size()));
    }
    Transition t;
    auto id = text::parse_int(f[0]);
    if (!id || *id < 0) throw DatasetParseError(lineno, "session_id", "bad identifier");
    t.session_id = static_cast<std::uint64_t>(*id);
    auto step = text::parse_int(f[1]);
    if (!step || *step < 0) throw DatasetParseError(lineno, "step", "bad step");
    t.step = static_cast<int>(*step);
    t.state = parse_vec(f[2], lineno, "state");
    t.action = parse_vec(f[3], lineno, "action");
    auto r = text::parse_double(f[4]);
    if (!r) throw DatasetParseError(lineno, "reward", "bad decimal");
    t.reward = *r;
    t.next_state = parse_vec(f[5], lineno, "next_state");
    const auto done = text::trim(f[6]);
    if (done != "0" && done != "1") throw DatasetParseError(lineno, "done", "expected 0 or 1");
    t.done = done == "1";
    if (have_meta) {
      if (t.state.size() != d.meta.state_dim) throw DatasetParseError(lineno, "state", "dimension mismatch");
      if (t.next_state.size() != d.meta.state_dim) throw DatasetParseError(lineno, "next_state", "dimension mismatch");
      if (t.action.size() != d.meta.action_dim) throw DatasetParseError(lineno, "action", "dimension mismatch");
    }
    d.transitions.push_back(std::move(t));
  }
  if (!have_meta && !d.transitions.empty()) {
    d.meta.state_dim = static_cast<int>(d.transitions.front().state.size());
    d.meta.action_dim = static_cast<int>(d.transitions.front().action.size());
  }
  return d;
}

void save(const TransitionDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_dataset(out, dataset);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

TransitionDataset load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_dataset(in);
}

std::pair<TransitionDataset, TransitionDataset> time_split(const TransitionDataset& dataset, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("time_split: fraction must lie in (0, 1)");
  const auto starts = dataset.session_starts();
  const std::size_t sessions = starts.size();
  if (sessions < 2) throw std::invalid_argument("time_split: need at least 2 sessions");
  // The small slack keeps products like 0.9 * 10 from rounding up past 9.
  auto train_sessions = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(sessions) - 1e-9));
  train_sessions = std::clamp<std::size_t>(train_sessions, 1, sessions - 1);
  const std::size_t cut = starts[train_sessions];

  TransitionDataset train, test;
  train.meta = test.meta = dataset.meta;
  train.transitions.assign(dataset.transitions.begin(), dataset.transitions.begin() + static_cast<long>(cut));
  test.transitions.assign(dataset.transitions.begin() + static_cast<long>(cut), dataset.transitions.end());
  for (const auto& [id, mode] : dataset.session_modes) {
    bool in_train = false;
    for (std::size_t s = 0; s < train_sessions; ++s) {
      if (dataset.transitions[starts[s]].session_id == id) {
        in_train = true;
        break;
      }
    }
    (in_train ? train : test).session_modes[id] = mode;
  }
  return {std::move(train), std::move(test)};
}

std::vector<Transition> sample_minibatch(std::span<const Transition> source, int count, Rng& rng) {
  if (count <= 0) throw std::invalid_argument("sample_minibatch: batch size must be positive");
  if (source.empty()) throw std::invalid_argument("sample_minibatch: empty source");
  std::uniform_int_distribution<std::size_t> pick(0, source.size() - 1);
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(source[pick(rng)]);
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ || t.action.size() != action_dim_) {
    throw std::invalid_argument("replay buffer: transition dimensions do not match buffer");
  }
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(std::move(t));
}

std::vector<Transition> ReplayBuffer::sample(int count, Rng& rng) const {
  if (count <= 0) throw std::invalid_argument("sample_minibatch: batch size must be positive");
  if (entries_.empty()) throw std::invalid_argument("sample_minibatch: empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, entries_.size() - 1);
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(entries_[pick(rng)]);
  return out;
}

Batch pack(std::span<const Transition> transitions) {
  Batch b;
  if (transitions.empty()) return b;
  const auto n = static_cast<Eigen::Index>(transitions.size());
  const auto ds = transitions.front().state.size();
  const auto k = transitions.front().action.size();
  b.states.resize(ds, n);
  b.actions.resize(k, n);
  b.next_states.resize(ds, n);
  b.rewards.resize(n);
  b.not_done.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = transitions[static_cast<std::size_t>(i)];
    b.states.col(i) = t.state;
    b.actions.col(i) = t.action;
    b.next_states.col(i) = t.next_state;
    b.rewards(i) = t.reward;
    b.not_done(i) = t.done ? 0.0 : 1.0;
  }
  return b;
}

Batch sample_batch(const ReplayBuffer& buffer, int count, Rng& rng) {
  if (count <= 0) throw std::invalid_argument("sample_minibatch: batch size must be positive");
  if (buffer.empty()) throw std::invalid_argument("sample_minibatch: empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
  const Transition& first = buffer[0];
  Batch b;
  b.states.resize(first.state.size(), count);
  b.actions.resize(first.action.size(), count);
  b.next_states.resize(first.state.size(), count);
  b.rewards.resize(count);
  b.not_done.resize(count);
  for (int i = 0; i < count; ++i) {
    const Transition& t = buffer[pick(rng)];
    b.states.col(i) = t.state;
    b.actions.col(i) = t.action;
    b.next_states.col(i) = t.next_state;
    b.rewards(i) = t.reward;
    b.not_done(i) = t.done ? 0.0 : 1.0;
  }
  return b;
}

}  // namespace mtf
