// Criterion 7: conservative OPE against exact values on the three-state MDP,
// and against Monte-Carlo values on the simulator.

#include <algorithm>
#include <array>
#include <cmath>

#include "criteria.hpp"
#include "mtf/exploration.hpp"
#include "mtf/ope.hpp"
#include "pipeline.hpp"
#include "tabular_mdp.hpp"

namespace mtf::acceptance {

namespace {

using testing::TablePolicy;
using testing::TabularMdp;

constexpr double sim_penalty = 0.3;

Outcome tabular_part() {
  const TabularMdp mdp;
  const TransitionDataset d = mdp.collect(1000, 5);
  OpeConfig c;
  c.iterations = 30000;
  c.learning_rate = 3e-4;
  bool pass = true;
  std::string detail = "tabular (" + std::to_string(d.size()) + " transitions):";
  const auto starts = d.initial_states();
  for (const std::array<int, 3> choice : {std::array<int, 3>{1, 1, 1}, std::array<int, 3>{0, 1, 0},
                                          std::array<int, 3>{0, 0, 0}, std::array<int, 3>{1, 0, 1}}) {
    const auto values = mdp.exact_values(choice);
    double exact = 0.0;
    for (const Vec& s : starts) exact += values[static_cast<std::size_t>(TabularMdp::decode(s))];
    exact /= static_cast<double>(starts.size());
    Rng rng(1);
    const double estimate = evaluate_policy(d, TablePolicy(choice), c, rng).estimate;
    const double rel = (estimate - exact) / exact;
    const bool ok = std::abs(rel) <= 0.10 && rel <= 0.02;
    pass = pass && ok;
    detail += " " + std::to_string(choice[0]) + std::to_string(choice[1]) + std::to_string(choice[2]) + " " +
              fmt(estimate) + " vs " + fmt(exact) + " (" + fmt(100.0 * rel, 3) + "%)" + (ok ? "" : " out of bounds");
  }
  return {pass, detail};
}

Outcome simulator_part() {
  const Simulator& sim = desk_simulator();
  const PipelineRun& run = pipeline(1);
  const TransitionDataset test = collect_mixed(sim, run.random_agent, pipeline_sigma, 8000, derive_seed(1, 5));
  Rng clone_rng(derive_seed(1, 6));
  const auto clone = train_behavior_clone(run.mixed_data, CloneConfig{}, clone_rng);
  const RandomPolicy random(sim.action_dim());
  const Policy* policies[] = {&random, clone.get(), run.mixed_agent.get()};

  OpeConfig c;
  c.iterations = 30000;
  c.learning_rate = 3e-4;
  c.cql_penalty = sim_penalty;
  std::array<double, 3> est{}, mcv{};
  for (std::size_t i = 0; i < 3; ++i) {
    Rng rng(derive_seed(1, 7));
    const EvalReport r = evaluate_policy(test, *policies[i], c, rng, McOracle{&sim, mc_sessions, mc_seed});
    est[i] = r.estimate;
    mcv[i] = *r.mc_value;
  }
  const double range = *std::max_element(mcv.begin(), mcv.end()) - *std::min_element(mcv.begin(), mcv.end());
  bool ranks_agree = true;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j && (mcv[i] < mcv[j]) != (est[i] < est[j])) ranks_agree = false;
  bool conservative = true;
  std::string detail = "simulator (penalty " + fmt(sim_penalty, 3) + ", " + std::to_string(test.size()) +
                       " test transitions):";
  for (std::size_t i = 0; i < 3; ++i) {
    const bool ok = est[i] <= mcv[i] + 0.1 * range;
    conservative = conservative && ok;
    detail += " " + policies[i]->name() + " " + fmt(est[i]) + " vs mc " + fmt(mcv[i]) + (ok ? "" : " too high");
  }
  detail += "; slack 0.1 x range = " + fmt(0.1 * range, 3) + (ranks_agree ? ", ranks agree" : ", ranks disagree");
  return {ranks_agree && conservative, detail};
}

}  // namespace

Outcome ope_fidelity() {
  const Outcome tab = tabular_part();
  const Outcome sim = simulator_part();
  return {tab.pass && sim.pass, tab.detail + "; " + sim.detail};
}

}  // namespace mtf::acceptance
