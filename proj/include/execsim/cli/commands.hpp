#pragma once

#include <execsim/cli/config.hpp>
#include <execsim/dqn/agent.hpp>
#include <execsim/eval/report.hpp>
#include <execsim/market/kernel.hpp>
#include <execsim/market/session_io.hpp>
#include <execsim/util/fs.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace execsim::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kConfig = 2, kRuntime = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Command-line overrides; unset fields leave the config file value alone.
struct Overrides {
  std::string config_path;
  std::vector<std::string> sets;  // key=value
  std::optional<std::uint64_t> seed;
  std::optional<long long> episodes;
  std::vector<std::string> policies;
  std::optional<std::string> checkpoint;
  std::optional<int> parallel;
  std::optional<std::string> out;
  std::optional<double> duration;
  std::vector<double> lrs;
  bool resume{false};
};

inline RunConfig load_run_config(const Overrides& o, std::string_view command) {
  RunConfig c;
  if (!o.config_path.empty()) {
    std::ifstream is(o.config_path);
    if (!is) throw ConfigError("cannot read config file " + o.config_path);
    apply_config(c, is, o.config_path);
  }
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    set_key(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.parallel) c.eval.parallel = *o.parallel;
  if (o.duration) c.simulate.duration_s = *o.duration;
  if (o.episodes) {
    if (command == "train") c.train.episodes = *o.episodes;
    else c.eval.episodes = static_cast<int>(*o.episodes);
  }
  if (!o.policies.empty()) c.eval.policies = o.policies;
  if (o.checkpoint && command != "train") c.eval.checkpoint = *o.checkpoint;
  c.validate();
  return c;
}

inline fs::path experiment_dir(const RunConfig& c) { return fs::path(c.out) / c.experiment; }

// Output location and worker count are left out: they cannot change results.
inline void write_effective_config(const fs::path& dir, const RunConfig& c) {
  write_file_atomic(dir / "config.cfg", config_hash_line(config_hash(c)) + dump_config(c, true));
}

// --- simulate ------------------------------------------------------------------

// Writes <out>/<experiment>/simulate/seed_<s>/{snapshots,fills,fundamental}.csv.
inline void cmd_simulate(const RunConfig& c, std::ostream& log) {
  const auto dir = experiment_dir(c) / "simulate";
  const auto hash = config_hash(c);
  auto m = c.sim.market;
  m.session_length = execenv::seconds_to_ns(c.simulate.duration_s);
  for (int i = 0; i < c.simulate.n_seeds; ++i) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
    const auto session = market::kernel_run(m, seed);
    const auto d = dir / ("seed_" + std::to_string(seed));
    std::ostringstream snaps, fills, fund;
    market::write_snapshots_csv(snaps, session, c.simulate.depth, hash);
    market::write_fills_csv(fills, session, hash);
    market::write_fundamental_csv(fund, session, hash);
    write_file_atomic(d / "snapshots.csv", snaps.str());
    write_file_atomic(d / "fills.csv", fills.str());
    write_file_atomic(d / "fundamental.csv", fund.str());
    log << "seed " << seed << ": " << session.snapshots.size() << " snapshots, " << session.fills.size()
        << " fills -> " << d.string() << '\n';
  }
  write_effective_config(dir, c);
}

// --- train ---------------------------------------------------------------------

inline std::string lr_label(double lr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "lr_%g", lr);
  return buf;
}

// Trains (or resumes) one agent. Checkpoints are only written after complete
// episodes, so on a numerical failure the last one on disk is still good.
inline void train_one(const RunConfig& c, const fs::path& dir, const fs::path& checkpoint, bool resume, std::ostream& log) {
  const auto hash = config_hash(c);
  auto env = execenv::make_env(c.env_spec());
  dqn::DqnAgent agent(c.dqn, env.obs_dim(), env.n_actions(), c.seed);
  if (resume) {
    if (!fs::exists(checkpoint)) throw ConfigError("--resume: no checkpoint at " + checkpoint.string());
    agent.load(checkpoint);
    log << "resumed at episode " << agent.episodes() << " from " << checkpoint.string() << '\n';
  }
  fs::create_directories(dir);
  if (checkpoint.has_parent_path()) fs::create_directories(checkpoint.parent_path());
  auto write_curve = [&] {
    std::ostringstream os;
    dqn::write_learning_curve_csv(os, agent.curve(), hash);
    write_file_atomic(dir / "learning_curve.csv", os.str());
  };
  const long long target = agent.episodes() + c.train.episodes;
  dqn::TrainHooks hooks;
  hooks.on_episode = [&](const dqn::DqnAgent& a) {
    if (a.episodes() % c.train.checkpoint_every == 0 || a.episodes() == target) {
      a.save(checkpoint);
      write_curve();
      log << "episode " << a.episodes() << "  reward " << a.curve().back().total_reward << "  rolling "
          << a.curve().back().rolling_mean << "  eps " << a.epsilon() << '\n';
    }
  };
  try {
    dqn::train(agent, env, c.train.episodes, c.seed, hooks);
  } catch (const dqn::NonFiniteError& e) {
    write_curve();
    throw std::runtime_error(std::string(e.what()) + "; last good checkpoint kept at " + checkpoint.string());
  }
  agent.save(checkpoint);
  write_curve();

  // Q-values along one greedy episode on a held-out seed.
  strategies::RlPolicy greedy(std::make_shared<dqn::QNetwork>(agent.net()));
  std::vector<std::vector<double>> obs;
  obs.push_back(env.reset(derive_seed(c.seed, 0x0B5E)));
  greedy.begin_episode(env.config(), 0);
  for (bool done = false; !done;) {
    auto out = env.step(greedy.act(env.step_index(), obs.back()));
    done = out.done;
    if (!done) obs.push_back(std::move(out.observation));
  }
  std::ostringstream q;
  dqn::write_q_trace_csv(q, dqn::q_value_trace(agent.net(), obs), hash);
  write_file_atomic(dir / "q_trace.csv", q.str());
  write_effective_config(dir, c);
}

// One run, or one run per --lr value under <dir>/lr_<v>/.
inline void cmd_train(const RunConfig& c, const Overrides& o, std::ostream& log) {
  const auto dir = experiment_dir(c) / "train";
  if (o.lrs.empty()) {
    const fs::path ckpt = o.checkpoint ? fs::path(*o.checkpoint) : dir / "checkpoint.json";
    train_one(c, dir, ckpt, o.resume, log);
    return;
  }
  if (o.checkpoint) throw UsageError("--checkpoint cannot be combined with several --lr runs");
  for (double lr : o.lrs) {
    auto cl = c;
    cl.dqn.lr_start = lr;
    cl.validate();
    const auto d = dir / lr_label(lr);
    log << "-- " << lr_label(lr) << '\n';
    train_one(cl, d, d / "checkpoint.json", o.resume, log);
  }
}

// --- evaluate / benchmark -------------------------------------------------------

inline std::vector<eval::PolicySpec> policy_specs(const RunConfig& c, bool rl_may_train) {
  std::vector<eval::PolicySpec> out;
  for (const auto& name : c.eval.policies) {
    const auto& known = eval::policy_names();
    if (std::find(known.begin(), known.end(), name) == known.end()) throw UsageError("unknown policy '" + name + "'");
    for (const auto& p : out)
      if (p.name == name) throw UsageError("policy '" + name + "' listed twice");
    eval::PolicySpec p{name, nullptr};
    if (name == "rl") {
      if (!c.eval.checkpoint.empty()) {
        p.net = std::make_shared<dqn::QNetwork>(dqn::load_network(c.eval.checkpoint));
      } else if (!rl_may_train) {
        throw UsageError("policy rl requires --checkpoint");
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline void print_metrics(std::ostream& os, const eval::MetricsTable& t, const std::vector<eval::TTestRow>& tests) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %4s %12s %12s %8s %12s\n", "policy", "n", "E(IS)", "E(Pen)", "E(T)", "sigma2(IS)");
  os << buf;
  for (const auto& m : t) {
    std::snprintf(buf, sizeof buf, "%-8s %4zu %12.4f %12.4f %8.4f %12.4f\n", m.policy.c_str(), m.n, m.mean_is,
                  m.mean_pen, m.mean_t, m.var_is);
    os << buf;
  }
  for (const auto& r : tests) {
    std::snprintf(buf, sizeof buf, "t(%s > %s) = %.3f  df=%d  crit=%.3f  %s\n", r.a.c_str(), r.b.c_str(), r.result.t,
                  r.result.df, r.result.critical, r.result.reject ? "reject H0" : "keep H0");
    os << buf;
  }
}

inline eval::EvalOptions eval_options(const RunConfig& c, std::vector<eval::PolicySpec> policies) {
  eval::EvalOptions opt;
  opt.policies = std::move(policies);
  opt.seeds = eval::evaluation_seeds(c.seed, c.eval.episodes);
  opt.parallel = c.eval.parallel;
  opt.bins = c.eval.bins;
  return opt;
}

// Writes the report under <out>/<experiment>/.
inline void cmd_evaluate(const RunConfig& c, std::ostream& out) {
  const auto opt = eval_options(c, policy_specs(c, false));
  const auto rep = eval::evaluate(c.env_spec(), opt);
  const auto dir = experiment_dir(c);
  eval::write_report(dir, rep, config_hash(c), c.eval.bins);
  write_effective_config(dir, c);
  print_metrics(out, rep.metrics, rep.ttests);
}

// Sweep under <out>/<experiment>/benchmark/. Without a checkpoint, rl is trained
// afresh in every cell. Returns the number of failed cells.
inline int cmd_benchmark(const RunConfig& c, std::ostream& out, std::ostream& log) {
  const auto opt = eval_options(c, policy_specs(c, c.benchmark.train_episodes > 0));
  const auto dir = experiment_dir(c) / "benchmark";
  const auto hash = config_hash(c);
  const auto grid = eval::make_grid(c.benchmark.noise, c.benchmark.momentum_fixed, c.benchmark.momentum, c.benchmark.noise_fixed);
  eval::RlProvider trainer = [&](const execenv::EnvSpec& spec, const eval::SweepCell& cell) {
    auto env = execenv::make_env(spec);
    const auto seed = derive_seed(c.seed, fnv1a64(cell.table + "/" + cell.name));
    dqn::DqnAgent agent(c.dqn, env.obs_dim(), env.n_actions(), seed);
    log << cell.table << "/" << cell.name << ": training " << c.benchmark.train_episodes << " episodes\n";
    dqn::train(agent, env, c.benchmark.train_episodes, seed);
    fs::create_directories(dir / "checkpoints");
    agent.save(dir / "checkpoints" / (cell.table + "_" + cell.name + ".json"));
    return std::make_shared<const dqn::QNetwork>(agent.net());
  };
  int failed = 0;
  eval::sweep(dir, c.env_spec(), grid, opt, hash, trainer, [&](const eval::CellStatus& st) {
    out << "== " << st.cell.table << "/" << st.cell.name << " (noise " << st.cell.n_noise << ", momentum "
        << st.cell.n_momentum << ")\n";
    if (st.ok) {
      print_metrics(out, st.report->metrics, st.report->ttests);
    } else {
      ++failed;
      out << "FAILED: " << st.error << '\n';
    }
  });
  write_effective_config(dir, c);
  return failed;
}

// --- entry point ---------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Limit order book simulator and optimal execution toolkit", "execsim"};
  app.require_subcommand(1);
  Overrides o;
  std::vector<std::string> lr_text;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config_path, "config file (key = value lines)")->check(CLI::ExistingFile);
    s->add_option("--set", o.sets, "override one config key, key=value (repeatable)");
    s->add_option("--seed", o.seed, "master seed");
    s->add_option("--out", o.out, "output root (default $EXECSIM_OUT or ./results)");
  };
  auto* sim = app.add_subcommand("simulate", "run background market sessions and write CSVs");
  common(sim);
  sim->add_option("--duration", o.duration, "session length in seconds");

  auto* train = app.add_subcommand("train", "train a DQN execution agent");
  common(train);
  train->add_option("--episodes", o.episodes, "episodes to run");
  train->add_option("--checkpoint", o.checkpoint, "checkpoint path (default <run dir>/checkpoint.json)");
  train->add_option("--lr", o.lrs, "initial learning rate; repeat for one run per value");
  train->add_flag("--resume", o.resume, "continue from the checkpoint");
  train->add_option("--parallel", o.parallel, "accepted for symmetry; training is sequential");

  auto* evaluate = app.add_subcommand("evaluate", "evaluate policies over held-out seeds");
  common(evaluate);
  evaluate->add_option("--episodes", o.episodes, "episodes per policy");
  evaluate->add_option("--policy", o.policies, "rl, twap, passive or random (repeatable)")->delimiter(',');
  evaluate->add_option("--checkpoint", o.checkpoint, "trained network for rl");
  evaluate->add_option("--parallel", o.parallel, "worker threads");

  auto* bench = app.add_subcommand("benchmark", "sweep agent populations");
  common(bench);
  bench->add_option("--episodes", o.episodes, "episodes per policy and cell");
  bench->add_option("--policy", o.policies, "policies (repeatable)")->delimiter(',');
  bench->add_option("--checkpoint", o.checkpoint, "trained network for rl, shared by all cells");
  bench->add_option("--parallel", o.parallel, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    const auto c = load_run_config(o, cmd->get_name());
    if (cmd == sim) {
      cmd_simulate(c, err);
    } else if (cmd == train) {
      cmd_train(c, o, err);
    } else if (cmd == evaluate) {
      cmd_evaluate(c, out);
    } else if (cmd_benchmark(c, out, err) > 0) {
      err << "benchmark: some cells failed, see sweep_status.csv\n";
      return kRuntime;
    }
    return kOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace execsim::cli
