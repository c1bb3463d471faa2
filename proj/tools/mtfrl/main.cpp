// mtfrl: simulate, collect, train, evaluate, sweep and export-plots.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include "mtf/alloc.hpp"
#include "mtf/bcq.hpp"
#include "mtf/datastore.hpp"
#include "mtf/exploration.hpp"
#include "mtf/ope.hpp"
#include "mtf/td3.hpp"
#include "mtf/text.hpp"
#include "run_support.hpp"

namespace {

using namespace mtfrl;
using mtf::text::format_double;

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

void check_dims(const mtf::TransitionDataset& d, const mtf::Simulator& sim, const std::string& what) {
  if (d.meta.state_dim != sim.state_dim() || d.meta.action_dim != sim.action_dim())
    throw std::invalid_argument(what + " dimensions do not match the simulator config");
}

struct SimulateArgs {
  std::string config, policy = "random", out;
  int sessions = 100;
  std::uint64_t seed = 1;
};

int run_simulate(const SimulateArgs& a, Manifest& m) {
  const RunConfig rc = RunConfig::load(a.config);
  const mtf::Simulator sim(rc.sim);
  const auto policy = load_policy(a.policy, sim.action_dim());
  const mtf::TransitionDataset d = mtf::collect_policy(sim, *policy, a.sessions, a.seed);
  mtf::save(d, a.out);
  m.add_config(rc);
  m.set("policy", a.policy);
  m.set("sessions", std::to_string(a.sessions));
  m.set_seed("collection", a.seed);
  m.add_output(a.out);
  m.write(manifest_path(a.out));
  std::cout << "wrote " << d.size() << " transitions in " << d.session_count() << " sessions to " << a.out << '\n';
  return 0;
}

struct CollectArgs {
  std::string config, mode = "random", agent, out;
  double sigma = 0.1;
  int sessions = 1000;
  std::uint64_t seed = 1;
};

int run_collect(const CollectArgs& a, Manifest& m) {
  const RunConfig rc = RunConfig::load(a.config);
  mtf::ExplorationConfig ec;
  ec.mode = mtf::parse_exploration_mode(a.mode);
  ec.sigma = a.sigma;
  ec.sessions = a.sessions;
  ec.seed = a.seed;
  if (!a.agent.empty()) ec.agent_path = a.agent;
  ec.validate();
  const mtf::Simulator sim(rc.sim);
  mtf::TransitionDataset d;
  if (ec.mode == mtf::ExplorationMode::random) {
    d = mtf::collect_random(sim, ec.sessions, ec.seed);
  } else {
    const auto agent = load_policy(*ec.agent_path, sim.action_dim());
    d = ec.mode == mtf::ExplorationMode::mixed ? mtf::collect_mixed(sim, agent, ec.sigma, ec.sessions, ec.seed)
                                               : mtf::collect_action_noise(sim, agent, ec.sigma, ec.sessions, ec.seed);
  }
  mtf::save(d, a.out);
  m.add_config(rc);
  m.set("mode", mtf::to_string(ec.mode));
  m.set("sigma", format_double(ec.sigma));
  m.set("sessions", std::to_string(ec.sessions));
  if (ec.agent_path) m.set("agent", *ec.agent_path);
  m.set_seed("collection", ec.seed);
  if (ec.mode == mtf::ExplorationMode::mixed) {
    m.set_seed("mixed_noise", mtf::mixed_noise_seed(ec.seed));
    m.set_seed("mixed_random", mtf::mixed_random_seed(ec.seed));
  }
  m.add_output(a.out);
  m.write(manifest_path(a.out));
  std::cout << "wrote " << d.size() << " transitions in " << d.session_count() << " sessions to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  std::string config, algo = "bcq", dataset, out, log;
  std::optional<double> split;
  std::uint64_t seed = 1;
};

int run_train(const TrainArgs& a, Manifest& m) {
  const RunConfig rc = RunConfig::load(a.config);
  mtf::TransitionDataset d = mtf::load(a.dataset);
  if (a.split) d = mtf::time_split(d, *a.split).first;
  mtf::Rng rng(a.seed);
  std::ostringstream checkpoint;
  mtf::TrainingLog log;
  bool finite = true;
  if (a.algo == "bcq") {
    auto r = mtf::train_bcq(d, rc.agent, rng);
    r.agent->save(checkpoint);
    log = std::move(r.log);
    finite = r.agent->all_finite();
  } else {
    auto r = mtf::train_td3(d, rc.agent, rng);
    r.agent->save(checkpoint);
    log = std::move(r.log);
    finite = r.agent->all_finite();
  }
  write_text(a.out, checkpoint.str());
  const std::string log_path = a.log.empty() ? a.out + ".log" : a.log;
  std::ostringstream log_text;
  mtf::write_training_log(log_text, log);
  write_text(log_path, log_text.str());

  m.add_config(rc);
  m.set("algo", a.algo);
  m.set("dataset", a.dataset);
  m.set("transitions", std::to_string(d.size()));
  if (a.split) m.set("split", format_double(*a.split));
  m.set_seed("training", a.seed);
  m.add_output(a.out);
  m.add_output(log_path);
  m.write(manifest_path(a.out));
  std::cout << a.algo << ": " << log.size() << " epochs on " << d.size() << " transitions";
  if (!log.empty()) std::cout << ", final mean Q " << log.back().mean_q;
  std::cout << '\n';
  if (!finite) {
    std::cerr << "warning: training produced non-finite parameters\n";
    return 3;
  }
  return 0;
}

struct EvaluateArgs {
  std::string config, dataset, clone_dataset, out, table;
  std::vector<std::string> policies;
  std::optional<double> split;
  bool with_mc = false;
  int mc_sessions = 2000;
  std::optional<std::uint64_t> mc_seed;
  std::uint64_t seed = 1;
};

int run_evaluate(const EvaluateArgs& a, Manifest& m) {
  const RunConfig rc = RunConfig::load(a.config);
  mtf::TransitionDataset d = mtf::load(a.dataset);
  if (a.split) d = mtf::time_split(d, *a.split).second;
  const mtf::Simulator sim(rc.sim);
  check_dims(d, sim, a.dataset);
  const std::uint64_t clone_seed = mtf::derive_seed(a.seed, 0xc1);
  const std::uint64_t mc_seed = a.mc_seed.value_or(mtf::derive_seed(a.seed, 0x3c));

  std::map<std::string, std::string> report{{"policies", ""}, {"seed", std::to_string(a.seed)}};
  std::string table = "policy\testimate\tmc_value\tgap\tfinal_loss\ttransitions\tinitial_states\n";
  for (std::size_t i = 0; i < a.policies.size(); ++i) {
    const std::string& spec = a.policies[i];
    std::shared_ptr<const mtf::Policy> policy;
    if (spec == "behavior-clone") {
      const mtf::TransitionDataset source = a.clone_dataset.empty() ? d : mtf::load(a.clone_dataset);
      mtf::Rng clone_rng(clone_seed);
      policy = mtf::train_behavior_clone(source, rc.clone, clone_rng);
    } else {
      policy = load_policy(spec, sim.action_dim());
    }
    std::string label = policy_label(spec);
    if (report.count(label + ".estimate")) label += "_" + std::to_string(i);
    mtf::Rng rng(a.seed);
    std::optional<mtf::McOracle> oracle;
    if (a.with_mc) oracle = mtf::McOracle{&sim, a.mc_sessions, mc_seed};
    const mtf::EvalReport r = mtf::evaluate_policy(d, *policy, rc.ope, rng, oracle);
    for (const auto& [k, v] : r.to_map()) report[label + "." + k] = v;
    report["policies"] += (i ? "," : "") + label;
    table += label + "\t" + format_double(r.estimate) + "\t" + cell(r.mc_value) + "\t" + cell(r.gap) + "\t" +
             format_double(r.final_loss) + "\t" + std::to_string(r.transitions) + "\t" +
             std::to_string(r.initial_states) + "\n";
    std::cout << label << ": estimate " << r.estimate;
    if (r.mc_value) std::cout << ", mc " << *r.mc_value;
    std::cout << '\n';
  }

  std::ostringstream report_text;
  mtf::text::write_config(report_text, report);
  write_text(a.out, report_text.str());
  const std::string table_path = a.table.empty() ? a.out + ".tsv" : a.table;
  write_text(table_path, table);

  m.add_config(rc);
  m.set("dataset", a.dataset);
  if (!a.clone_dataset.empty()) m.set("clone_dataset", a.clone_dataset);
  if (a.split) m.set("split", format_double(*a.split));
  m.set("policies", report["policies"]);
  m.set_seed("evaluation", a.seed);
  m.set_seed("clone", clone_seed);
  if (a.with_mc) {
    m.set_seed("mc", mc_seed);
    m.set("mc_sessions", std::to_string(a.mc_sessions));
  }
  m.add_output(a.out);
  m.add_output(table_path);
  m.write(manifest_path(a.out));
  return 0;
}

struct SweepArgs {
  std::string config, param, dataset, out;
  std::vector<double> values;
  double split = 0.9;
  bool with_mc = false;
  int mc_sessions = 2000;
  std::uint64_t seed = 1;
};

int run_sweep(const SweepArgs& a, Manifest& m) {
  if (a.param != "rho" && a.param != "critic_lr") throw std::invalid_argument("--param must be rho or critic_lr");
  const RunConfig rc = RunConfig::load(a.config);
  const mtf::TransitionDataset all = mtf::load(a.dataset);
  const mtf::Simulator sim(rc.sim);
  check_dims(all, sim, a.dataset);
  const auto [train, test] = mtf::time_split(all, a.split);
  const std::uint64_t mc_seed = mtf::derive_seed(a.seed, 0x3c);

  std::string table = "param\tvalue\tseed\tepochs\tfinal_mean_q\tope_estimate\tmc_value\tstatus\n";
  bool all_ok = true;
  for (const double value : a.values) {
    mtf::AgentHyperparams h = rc.agent;
    (a.param == "rho" ? h.rho : h.lr_critic) = value;
    h.validate();
    const std::uint64_t run_seed = mtf::derive_value_seed(a.seed, value);
    mtf::Rng rng(run_seed);
    const mtf::BcqResult r = mtf::train_bcq(train, h, rng);
    std::string status = "ok";
    std::optional<double> estimate, mc;
    const double final_q = r.log.empty() ? 0.0 : r.log.back().mean_q;
    if (!r.agent->all_finite() || !std::isfinite(final_q)) {
      status = "diverged";
    } else {
      const mtf::BcqPolicy policy(r.agent);
      mtf::Rng ope_rng(mtf::derive_seed(run_seed, 1));
      std::optional<mtf::McOracle> oracle;
      if (a.with_mc) oracle = mtf::McOracle{&sim, a.mc_sessions, mc_seed};
      try {
        const mtf::EvalReport rep = mtf::evaluate_policy(test, policy, rc.ope, ope_rng, oracle);
        estimate = rep.estimate;
        mc = rep.mc_value;
      } catch (const mtf::OpeDivergence&) {
        status = "ope_diverged";
      }
    }
    all_ok = all_ok && status == "ok";
    table += a.param + "\t" + format_double(value) + "\t" + std::to_string(run_seed) + "\t" +
             std::to_string(r.log.size()) + "\t" + format_double(final_q) + "\t" + cell(estimate) + "\t" + cell(mc) +
             "\t" + status + "\n";
    m.set_seed("run." + format_double(value), run_seed);
    std::cout << a.param << "=" << value << ": " << status << ", estimate " << cell(estimate) << '\n';
  }
  write_text(a.out, table);

  m.add_config(rc);
  m.set("param", a.param);
  m.set("dataset", a.dataset);
  m.set("split", format_double(a.split));
  m.set_seed("base", a.seed);
  if (a.with_mc) {
    m.set_seed("mc", mc_seed);
    m.set("mc_sessions", std::to_string(a.mc_sessions));
  }
  m.add_output(a.out);
  m.write(manifest_path(a.out));
  return all_ok ? 0 : 3;
}

struct ExportArgs {
  std::vector<std::string> logs;
  std::string checkpoint, states, dataset, out_dir;
  bool normalize = false;
  int bins = 20;
  std::uint64_t seed = 1;
};

void add_histogram(std::string& out, const std::string& source, const mtf::nn::Matrix& actions, int bins) {
  for (Eigen::Index dim = 0; dim < actions.rows(); ++dim) {
    std::vector<long> counts(static_cast<std::size_t>(bins), 0);
    for (Eigen::Index j = 0; j < actions.cols(); ++j) {
      const double x = std::clamp(actions(dim, j), -1.0, 1.0);
      const int b = std::min(bins - 1, static_cast<int>((x + 1.0) / 2.0 * bins));
      ++counts[static_cast<std::size_t>(b)];
    }
    for (int b = 0; b < bins; ++b) {
      out += source + "\t" + std::to_string(dim) + "\t" + format_double(-1.0 + 2.0 * b / bins) + "\t" +
             format_double(-1.0 + 2.0 * (b + 1) / bins) + "\t" + std::to_string(counts[static_cast<std::size_t>(b)]) +
             "\n";
    }
  }
}

mtf::nn::Matrix columns(const std::vector<mtf::Transition>& ts, bool actions) {
  if (ts.empty()) return {};
  const auto rows = (actions ? ts[0].action : ts[0].state).size();
  mtf::nn::Matrix out(rows, static_cast<Eigen::Index>(ts.size()));
  for (std::size_t j = 0; j < ts.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = actions ? ts[j].action : ts[j].state;
  return out;
}

int run_export(const ExportArgs& a, Manifest& m) {
  if (a.logs.empty() && a.dataset.empty() && a.checkpoint.empty())
    throw std::invalid_argument("export-plots needs --log, --dataset or --checkpoint");
  if (!a.checkpoint.empty() && a.states.empty()) throw std::invalid_argument("--checkpoint needs --states");
  if (a.bins < 1) throw std::invalid_argument("--bins must be >= 1");
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);

  if (!a.logs.empty()) {
    std::string curves = "run\tepoch\tmean_q\tgenerator_loss\tactor_objective\tcritic_loss";
    curves += a.normalize ? "\tmean_q_normalized\n" : "\n";
    for (const std::string& entry : a.logs) {
      const auto eq = entry.find('=');
      const std::string label = eq == std::string::npos ? fs::path(entry).stem().string() : entry.substr(0, eq);
      const std::string path = eq == std::string::npos ? entry : entry.substr(eq + 1);
      std::ifstream in(path);
      if (!in) throw std::runtime_error("cannot open log " + path);
      const mtf::TrainingLog log = mtf::read_training_log(in);
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto& e : log) {
        lo = std::min(lo, e.mean_q);
        hi = std::max(hi, e.mean_q);
      }
      for (const auto& e : log) {
        curves += label + "\t" + std::to_string(e.epoch) + "\t" + format_double(e.mean_q) + "\t" +
                  format_double(e.generator_loss) + "\t" + format_double(e.actor_objective) + "\t" +
                  format_double(e.critic_loss);
        if (a.normalize) curves += "\t" + format_double(hi > lo ? (e.mean_q - lo) / (hi - lo) : 0.0);
        curves += "\n";
      }
      m.set("log." + label, path);
    }
    write_text(dir / "curves.tsv", curves);
    m.add_output(dir / "curves.tsv");
  }

  if (!a.dataset.empty() || !a.checkpoint.empty()) {
    std::string hist = "source\tdim\tbin_lo\tbin_hi\tcount\n";
    if (!a.dataset.empty()) {
      add_histogram(hist, "dataset", columns(mtf::load(a.dataset).transitions, true), a.bins);
      m.set("dataset", a.dataset);
    }
    if (!a.checkpoint.empty()) {
      const mtf::TransitionDataset states = mtf::load(a.states);
      const auto policy = load_policy(a.checkpoint, states.meta.action_dim);
      mtf::Rng rng(a.seed);
      add_histogram(hist, "policy", policy->act_batch(columns(states.transitions, false), rng), a.bins);
      m.set("checkpoint", a.checkpoint);
      m.set("states", a.states);
      m.set_seed("policy", a.seed);
    }
    write_text(dir / "actions.tsv", hist);
    m.add_output(dir / "actions.tsv");
  }
  m.set("bins", std::to_string(a.bins));
  m.write(dir / "manifest.txt");
  std::cout << "wrote plot data to " << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  mtf::tune_allocator();
  CLI::App app{"Offline reinforcement learning for multi-task fusion ranking"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Roll out a policy in the simulator and log trajectories");
  simulate->add_option("--config", sim_args.config, "Flat key = value config")->check(CLI::ExistingFile);
  simulate->add_option("--policy", sim_args.policy, "random or an agent checkpoint");
  simulate->add_option("--sessions", sim_args.sessions, "Number of sessions")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim_args.seed, "Collection seed");
  simulate->add_option("--out", sim_args.out, "Dataset file")->required();

  CollectArgs collect_args;
  auto* collect = app.add_subcommand("collect", "Collect an exploration dataset");
  collect->add_option("--config", collect_args.config, "Flat key = value config")->check(CLI::ExistingFile);
  collect->add_option("--mode", collect_args.mode, "random, action_noise or mixed")
      ->check(CLI::IsMember({"random", "action_noise", "mixed"}));
  collect->add_option("--agent", collect_args.agent, "Source agent checkpoint")->check(CLI::ExistingFile);
  collect->add_option("--sigma", collect_args.sigma, "Action noise standard deviation");
  collect->add_option("--sessions", collect_args.sessions, "Number of sessions");
  collect->add_option("--seed", collect_args.seed, "Collection seed");
  collect->add_option("--out", collect_args.out, "Dataset file")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train an agent on a dataset");
  train->add_option("--config", train_args.config, "Flat key = value config")->check(CLI::ExistingFile);
  train->add_option("--algo", train_args.algo, "bcq or td3")->check(CLI::IsMember({"bcq", "td3"}));
  train->add_option("--dataset", train_args.dataset, "Training dataset")->required()->check(CLI::ExistingFile);
  train->add_option("--split", train_args.split, "Train on this leading fraction of sessions")
      ->check(CLI::Range(0.0, 1.0));
  train->add_option("--seed", train_args.seed, "Training seed");
  train->add_option("--out", train_args.out, "Checkpoint file")->required();
  train->add_option("--log", train_args.log, "Training log file (default <out>.log)");

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Conservative off-policy evaluation");
  evaluate->add_option("--config", eval_args.config, "Flat key = value config")->check(CLI::ExistingFile);
  evaluate->add_option("--dataset", eval_args.dataset, "Evaluation dataset")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--split", eval_args.split, "Evaluate on the sessions after this leading fraction")
      ->check(CLI::Range(0.0, 1.0));
  evaluate->add_option("--policy", eval_args.policies, "Checkpoint, random or behavior-clone (repeatable)")
      ->required();
  evaluate->add_option("--clone-dataset", eval_args.clone_dataset, "Dataset for the behavior clone")
      ->check(CLI::ExistingFile);
  evaluate->add_flag("--with-mc", eval_args.with_mc, "Also compute the simulator Monte-Carlo value");
  evaluate->add_option("--mc-sessions", eval_args.mc_sessions, "Monte-Carlo sessions")->check(CLI::PositiveNumber);
  evaluate->add_option("--mc-seed", eval_args.mc_seed, "Monte-Carlo seed");
  evaluate->add_option("--seed", eval_args.seed, "Evaluation seed");
  evaluate->add_option("--out", eval_args.out, "Report file")->required();
  evaluate->add_option("--table", eval_args.table, "Table file (default <out>.tsv)");

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Train one agent per hyperparameter value");
  sweep->add_option("--config", sweep_args.config, "Flat key = value config")->check(CLI::ExistingFile);
  sweep->add_option("--param", sweep_args.param, "rho or critic_lr")
      ->required()
      ->check(CLI::IsMember({"rho", "critic_lr"}));
  sweep->add_option("--values", sweep_args.values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--dataset", sweep_args.dataset, "Shared dataset")->required()->check(CLI::ExistingFile);
  sweep->add_option("--split", sweep_args.split, "Leading fraction of sessions used for training")
      ->check(CLI::Range(0.0, 1.0));
  sweep->add_flag("--with-mc", sweep_args.with_mc, "Also compute the simulator Monte-Carlo value");
  sweep->add_option("--mc-sessions", sweep_args.mc_sessions, "Monte-Carlo sessions")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sweep_args.seed, "Base seed");
  sweep->add_option("--out", sweep_args.out, "Table file")->required();

  ExportArgs export_args;
  auto* exporter = app.add_subcommand("export-plots", "Write tab-separated curve and histogram data");
  exporter->add_option("--log", export_args.logs, "Training log, optionally label=path (repeatable)");
  exporter->add_flag("--normalize", export_args.normalize, "Add a min-max normalized mean-Q column");
  exporter->add_option("--dataset", export_args.dataset, "Dataset whose logged actions are histogrammed")
      ->check(CLI::ExistingFile);
  exporter->add_option("--checkpoint", export_args.checkpoint, "Agent whose actions are histogrammed")
      ->check(CLI::ExistingFile);
  exporter->add_option("--states", export_args.states, "Dataset supplying states for --checkpoint")
      ->check(CLI::ExistingFile);
  exporter->add_option("--bins", export_args.bins, "Histogram bins over [-1, 1]");
  exporter->add_option("--seed", export_args.seed, "Seed for stochastic policies");
  exporter->add_option("--out-dir", export_args.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return e.get_exit_code() ? e.get_exit_code() : 2;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    Manifest manifest(name, argc, argv);
    if (*simulate) return run_simulate(sim_args, manifest);
    if (*collect) return run_collect(collect_args, manifest);
    if (*train) return run_train(train_args, manifest);
    if (*evaluate) return run_evaluate(eval_args, manifest);
    if (*sweep) return run_sweep(sweep_args, manifest);
    return run_export(export_args, manifest);
  } catch (const std::exception& e) {
    std::cerr << "mtfrl: " << e.what() << '\n';
    return 1;
  }
}
