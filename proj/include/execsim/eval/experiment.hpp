#pragma once

#include <execsim/dqn/agent.hpp>
#include <execsim/execenv/exec_env.hpp>
#include <execsim/market/rng.hpp>
#include <execsim/strategies/policies.hpp>
#include <execsim/util/errors.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace execsim::eval {

using lob::Qty;

struct EpisodeResult {
  std::string policy;
  std::uint64_t seed{0};
  double is{0.0};      // cents per parent share, positive = better than arrival
  double pen{0.0};     // depth + terminal + over-execution, cents per parent share
  double t_frac{1.0};
  double total_reward{0.0};
  Qty executed{0};
  Qty final_inventory{0};
  int steps{0};
  int children{0};
  std::size_t n_fills{0};
  // Sampled at steps where the policy traded, before its order.
  std::vector<double> spreads;
  std::vector<double> imbalances;
};

// Policy name plus the frozen network when the name is "rl".
struct PolicySpec {
  std::string name;
  std::shared_ptr<const dqn::QNetwork> net;
};

inline const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names{"rl", "twap", "passive", "random"};
  return names;
}

inline std::unique_ptr<strategies::Policy> instantiate(const PolicySpec& p) {
  if (p.name == "twap") return std::make_unique<strategies::TwapPolicy>();
  if (p.name == "passive") return strategies::make_passive();
  if (p.name == "random") return strategies::make_random();
  if (p.name == "rl") {
    if (!p.net) throw ConfigError("policy rl needs a trained network (checkpoint)");
    return std::make_unique<strategies::RlPolicy>(p.net);
  }
  throw ConfigError("unknown policy '" + p.name + "'");
}

inline std::uint64_t policy_seed(std::uint64_t episode_seed) { return derive_seed(episode_seed, 0x9011C7); }

// Evaluation seeds are kept apart from training seeds by a separate stream.
inline std::vector<std::uint64_t> evaluation_seeds(std::uint64_t master, int n) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < n; ++i) s.push_back(derive_seed(master, 0xE7A1, static_cast<std::uint64_t>(i)));
  return s;
}

inline EpisodeResult run_episode(execenv::ExecEnv& env, strategies::Policy& policy, std::uint64_t seed) {
  std::vector<double> obs = env.reset(seed);
  policy.begin_episode(env.config(), policy_seed(seed));
  EpisodeResult r;
  r.policy = policy.name();
  r.seed = seed;
  bool done = false;
  while (!done) {
    auto out = env.step(policy.act(env.step_index(), obs));
    const auto& info = out.info;
    if (info.action > 0) ++r.children;
    if (info.filled > 0) {
      if (info.best_bid && info.best_ask) r.spreads.push_back(static_cast<double>(*info.best_ask - *info.best_bid));
      r.imbalances.push_back(info.imbalance_1);
    }
    obs = std::move(out.observation);
    done = out.done;
  }
  const auto& s = env.stats();
  r.is = s.normalized_is();
  r.pen = s.normalized_penalty();
  r.t_frac = s.time_fraction();
  r.total_reward = s.total_reward;
  r.executed = s.executed;
  r.final_inventory = s.final_inventory;
  r.steps = s.steps;
  r.n_fills = env.fills().size();
  return r;
}

// One result per seed, in seed order. Each worker owns its environment and
// policy; the only shared state is the read-only network.
inline std::vector<EpisodeResult> run_experiment(const PolicySpec& policy, const execenv::EnvSpec& spec,
                                                 const std::vector<std::uint64_t>& seeds, int parallel = 1) {
  if (seeds.empty()) throw std::invalid_argument("run_experiment: no seeds");
  if (parallel < 1) throw ConfigError("parallel must be >= 1");
  instantiate(policy)->begin_episode(spec.exec, 0);  // startup checks before any work

  std::vector<EpisodeResult> out(seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    try {
      auto env = execenv::make_env(spec);
      auto p = instantiate(policy);
      for (std::size_t i = next++; i < seeds.size(); i = next++) out[i] = run_episode(env, *p, seeds[i]);
    } catch (...) {
      std::lock_guard lock(error_mu);
      if (!error) error = std::current_exception();
      next = seeds.size();
    }
  };
  const int n = std::min<int>(parallel, static_cast<int>(seeds.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace execsim::eval
