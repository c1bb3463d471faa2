// Criterion 3: offline TD3 against BCQ on a small random-exploration dataset.
// TD3's mean Q should pass the analytic return bound; BCQ's should stay in
// [0, 1.5 * bound] for every epoch.

#include <algorithm>
#include <limits>

#include "criteria.hpp"
#include "mtf/bcq.hpp"
#include "mtf/exploration.hpp"
#include "mtf/td3.hpp"

namespace mtf::acceptance {

namespace {

constexpr std::size_t target_transitions = 5000;
constexpr long updates = 50000;

// Leading whole sessions of a random collection until 5000 transitions.
TransitionDataset five_k_dataset(const Simulator& sim, std::uint64_t seed) {
  TransitionDataset all = collect_random(sim, 1000, seed);
  TransitionDataset out;
  out.meta = all.meta;
  for (const Transition& t : all.transitions) {
    if (t.step == 0 && out.size() >= target_transitions) break;
    out.transitions.push_back(t);
    out.session_modes[t.session_id] = all.session_modes.at(t.session_id);
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  long first_above = -1;
};

}  // namespace

Outcome extrapolation_error() {
  const Simulator sim{SimConfig{}};
  AgentHyperparams h;
  h.epochs = updates;
  h.hidden = {64, 64};
  const double bound = sim.max_step_reward() / (1.0 - h.gamma);

  bool pass = true;
  std::string detail = "bound r_max/(1-gamma) = " + fmt(bound);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const TransitionDataset d = five_k_dataset(sim, derive_seed(seed, 30));
    Range td3, bcq;
    auto track = [](Range& r, double bound_) {
      return [&r, bound_](const EpochLog& e) {
        r.lo = std::min(r.lo, e.mean_q);
        r.hi = std::max(r.hi, e.mean_q);
        if (r.first_above < 0 && e.mean_q > bound_) r.first_above = e.epoch;
        return true;
      };
    };
    Rng r1(derive_seed(seed, 31));
    train_td3(d, h, r1, track(td3, bound));
    Rng r2(derive_seed(seed, 32));
    train_bcq(d, h, r2, track(bcq, bound));
    const bool td3_ok = td3.first_above > 0;
    const bool bcq_ok = bcq.lo >= 0.0 && bcq.hi <= 1.5 * bound;
    pass = pass && td3_ok && bcq_ok;
    detail += "; seed " + std::to_string(seed) + " (" + std::to_string(d.size()) + " transitions): td3 max " +
              fmt(td3.hi) + (td3_ok ? " exceeds at epoch " + std::to_string(td3.first_above) : " never exceeds") +
              ", bcq in [" + fmt(bcq.lo) + ", " + fmt(bcq.hi) + "]" + (bcq_ok ? "" : " outside [0, 1.5 bound]");
  }
  return {pass, detail};
}

}  // namespace mtf::acceptance
