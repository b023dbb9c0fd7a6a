#pragma once

#include <execsim/dqn/agent.hpp>
#include <execsim/execenv/exec_env.hpp>
#include <execsim/util/errors.hpp>
#include <execsim/util/hash.hpp>

#include <charconv>
#include <cstdlib>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace execsim::cli {

struct TrainConfig {
  long long episodes{300};        // episodes per invocation; a resumed run adds this many
  long long checkpoint_every{25};
};

struct EvalConfig {
  int episodes{50};
  int bins{30};
  int parallel{1};
  std::vector<std::string> policies{"rl", "twap", "passive", "random"};
  std::string checkpoint;
};

struct BenchmarkConfig {
  std::vector<int> noise{10, 1000, 2000};
  int momentum_fixed{12};
  std::vector<int> momentum{6, 12, 24};
  int noise_fixed{1000};
  long long train_episodes{300};  // per cell, used when rl has no checkpoint
};

struct SimulateConfig {
  double duration_s{3600.0};
  int n_seeds{1};
  int depth{10};
};

inline std::string default_out_root() {
  const char* env = std::getenv("EXECSIM_OUT");
  return env && *env ? env : "results";
}

struct RunConfig {
  std::uint64_t seed{1};
  std::string out{default_out_root()};
  std::string experiment{"default"};
  std::string venue{"simulated"};  // simulated | constant
  execenv::SimulatedMarketConfig sim;
  execenv::ConstantBookConfig constant;
  execenv::ExecConfig exec;
  dqn::DqnConfig dqn;
  TrainConfig train;
  EvalConfig eval;
  BenchmarkConfig benchmark;
  SimulateConfig simulate;

  [[nodiscard]] execenv::EnvSpec env_spec() const {
    if (venue == "constant") return {exec, constant};
    return {exec, sim};
  }

  void validate() const {
    if (venue != "simulated" && venue != "constant") throw ConfigError("venue must be 'simulated' or 'constant'");
    if (experiment.empty() || experiment.find('/') != std::string::npos)
      throw ConfigError("experiment must be a non-empty name without '/'");
    exec.validate();
    dqn.validate();
    if (venue == "simulated") {
      sim.market.validate();
      if (!(sim.warmup_s >= 0.0)) throw ConfigError("venue.warmup_s must be >= 0");
      if (execenv::seconds_to_ns(sim.warmup_s) + exec.window_ns() > sim.market.session_length)
        throw ConfigError("market.session_s must cover venue.warmup_s + exec.time_window_s");
      if (sim.market.book_depth < 5) throw ConfigError("market.book_depth must be >= 5 for the observation");
    } else {
      execenv::ConstantBookMarket check(constant);
    }
    if (train.episodes < 0 || train.checkpoint_every < 1) throw ConfigError("train.episodes >= 0, train.checkpoint_every >= 1");
    if (eval.episodes < 2 || eval.bins < 1 || eval.parallel < 1)
      throw ConfigError("eval.episodes >= 2, eval.bins >= 1, eval.parallel >= 1");
    if (eval.policies.empty()) throw ConfigError("eval.policies must not be empty");
    if (benchmark.train_episodes < 0) throw ConfigError("benchmark.train_episodes must be >= 0");
    for (int v : benchmark.noise)
      if (v < 0) throw ConfigError("benchmark.noise counts must be >= 0");
    for (int v : benchmark.momentum)
      if (v < 0) throw ConfigError("benchmark.momentum counts must be >= 0");
    if (!(simulate.duration_s >= 0.0) || simulate.n_seeds < 1 || simulate.depth < 1)
      throw ConfigError("simulate.duration_s >= 0, simulate.n_seeds >= 1, simulate.depth >= 1");
  }
};

// --- value codecs ----------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  s = trim(s);
  if (s.empty()) return out;
  for (;;) {
    const auto c = s.find(',');
    out.push_back(trim(s.substr(0, c)));
    if (c == std::string_view::npos) break;
    s.remove_prefix(c + 1);
  }
  return out;
}

template <class T>
T parse_value(std::string_view s) {
  s = trim(s);
  if constexpr (std::is_same_v<T, bool>) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("expected true/false, got '" + std::string(s) + "'");
  } else if constexpr (std::is_same_v<T, std::string>) {
    return std::string(s);
  } else if constexpr (std::is_arithmetic_v<T>) {
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
      throw ConfigError("expected a number, got '" + std::string(s) + "'");
    return v;
  } else {
    T v;
    for (auto item : split(s)) v.push_back(parse_value<typename T::value_type>(item));
    return v;
  }
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general);
  return std::string(buf, r.ptr);
}

template <class T>
std::string format_value(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_floating_point_v<T>) {
    return format_double(v);
  } else if constexpr (std::is_arithmetic_v<T>) {
    return std::to_string(v);
  } else {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + format_value(x);
    return s;
  }
}

}  // namespace detail

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
  bool hashed{true};  // false for keys that cannot change any output
};

namespace detail {

template <class Access>
Field bind(std::string key, Access access, bool hashed = true) {
  using T = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
  return Field{std::move(key), [access](RunConfig& c, std::string_view v) { access(c) = parse_value<T>(v); },
               [access](const RunConfig& c) { return format_value(access(const_cast<RunConfig&>(c))); }, hashed};
}

// Durations are configured in seconds and stored in nanoseconds.
template <class Access>
Field seconds(std::string key, Access access) {
  return Field{std::move(key),
               [access](RunConfig& c, std::string_view v) {
                 const double s = parse_value<double>(v);
                 if (!(s >= 0.0)) throw ConfigError("expected a duration >= 0");
                 access(c) = execenv::seconds_to_ns(s);
               },
               [access](const RunConfig& c) {
                 return format_double(static_cast<double>(access(const_cast<RunConfig&>(c))) / 1e9);
               }};
}

template <class E>
Field choice(std::string key, std::function<E&(RunConfig&)> access, std::vector<std::pair<std::string, E>> names) {
  return Field{std::move(key),
               [access, names](RunConfig& c, std::string_view v) {
                 v = trim(v);
                 for (const auto& [n, e] : names)
                   if (n == v) {
                     access(c) = e;
                     return;
                   }
                 throw ConfigError("unknown value '" + std::string(v) + "'");
               },
               [access, names](const RunConfig& c) {
                 for (const auto& [n, e] : names)
                   if (e == access(const_cast<RunConfig&>(c))) return n;
                 return std::string("?");
               }};
}

}  // namespace detail

#define EXECSIM_FIELD(key, expr) detail::bind(key, [](RunConfig& c) -> auto& { return expr; })

// Every recognised key, in dump order.
inline const std::vector<Field>& fields() {
  using detail::bind;
  static const std::vector<Field> f{
      EXECSIM_FIELD("seed", c.seed),
      bind("out", [](RunConfig& c) -> auto& { return c.out; }, false),
      EXECSIM_FIELD("experiment", c.experiment),
      EXECSIM_FIELD("venue", c.venue),
      EXECSIM_FIELD("venue.warmup_s", c.sim.warmup_s),

      EXECSIM_FIELD("market.n_noise", c.sim.market.population.n_noise),
      EXECSIM_FIELD("market.n_value", c.sim.market.population.n_value),
      EXECSIM_FIELD("market.n_momentum", c.sim.market.population.n_momentum),
      EXECSIM_FIELD("market.n_market_maker", c.sim.market.population.n_market_maker),
      detail::seconds("market.session_s", [](RunConfig& c) -> auto& { return c.sim.market.session_length; }),
      EXECSIM_FIELD("market.book_depth", c.sim.market.book_depth),
      EXECSIM_FIELD("market.history_length", c.sim.market.history_length),
      detail::choice<lob::DepthMode>(
      "market.depth_mode", [](RunConfig& c) -> lob::DepthMode& { return c.sim.market.depth_mode; },
      {{"levels", lob::DepthMode::Levels}, {"ticks", lob::DepthMode::Ticks}}),
      EXECSIM_FIELD("market.mm_obs_noise_var", c.sim.market.mm_obs_noise_var),

      EXECSIM_FIELD("fundamental.mu", c.sim.market.fundamental.mu),
      EXECSIM_FIELD("fundamental.theta", c.sim.market.fundamental.theta),
      EXECSIM_FIELD("fundamental.sigma", c.sim.market.fundamental.sigma),
      EXECSIM_FIELD("fundamental.lambda", c.sim.market.fundamental.lambda),
      EXECSIM_FIELD("fundamental.jump_mu", c.sim.market.fundamental.jump_mu),
      EXECSIM_FIELD("fundamental.jump_sigma", c.sim.market.fundamental.jump_sigma),

      EXECSIM_FIELD("noise.wake_mean_s", c.sim.market.noise.wake_mean_seconds),
      EXECSIM_FIELD("noise.min_size", c.sim.market.noise.min_size),
      EXECSIM_FIELD("noise.max_size", c.sim.market.noise.max_size),

      EXECSIM_FIELD("value.mu", c.sim.market.value.mu),
      EXECSIM_FIELD("value.theta", c.sim.market.value.theta),
      EXECSIM_FIELD("value.lambda", c.sim.market.value.lambda),
      EXECSIM_FIELD("value.size", c.sim.market.value.size),
      EXECSIM_FIELD("value.obs_noise_var", c.sim.market.value.obs_noise_var),

      EXECSIM_FIELD("momentum.short_window", c.sim.market.momentum.short_window),
      EXECSIM_FIELD("momentum.long_window", c.sim.market.momentum.long_window),
      EXECSIM_FIELD("momentum.size", c.sim.market.momentum.size),
      EXECSIM_FIELD("momentum.wake_mean_s", c.sim.market.momentum.wake_mean_seconds),

      EXECSIM_FIELD("mm.pov", c.sim.market.market_maker.pov),
      EXECSIM_FIELD("mm.n_ticks", c.sim.market.market_maker.n_ticks),
      detail::seconds("mm.wake_interval_s", [](RunConfig& c) -> auto& { return c.sim.market.market_maker.wake_interval; }),
      detail::seconds("mm.window_max_s", [](RunConfig& c) -> auto& { return c.sim.market.market_maker.window_max; }),
      EXECSIM_FIELD("mm.min_size", c.sim.market.market_maker.min_size),

      EXECSIM_FIELD("constant.best_bid", c.constant.best_bid),
      EXECSIM_FIELD("constant.best_ask", c.constant.best_ask),
      EXECSIM_FIELD("constant.n_levels", c.constant.n_levels),
      EXECSIM_FIELD("constant.level_qty", c.constant.level_qty),
      EXECSIM_FIELD("constant.session_s", c.constant.session_s),

      detail::choice<execenv::Direction>(
      "exec.direction", [](RunConfig& c) -> execenv::Direction& { return c.exec.direction; },
      {{"buy", execenv::Direction::Buy}, {"sell", execenv::Direction::Sell}}),
      EXECSIM_FIELD("exec.parent_size", c.exec.parent_size),
      EXECSIM_FIELD("exec.time_window_s", c.exec.time_window_s),
      EXECSIM_FIELD("exec.step_dt_s", c.exec.step_dt_s),
      EXECSIM_FIELD("exec.q_min", c.exec.q_min),
      EXECSIM_FIELD("exec.n_size_actions", c.exec.n_size_actions),
      EXECSIM_FIELD("exec.alpha", c.exec.alpha),
      EXECSIM_FIELD("exec.beta", c.exec.beta),
      EXECSIM_FIELD("exec.over_exec_penalty", c.exec.over_exec_penalty),
      EXECSIM_FIELD("exec.history", c.exec.history),
      EXECSIM_FIELD("exec.buffer_length", c.exec.buffer_length),
      EXECSIM_FIELD("exec.relative_quotes", c.exec.relative_quotes),
      EXECSIM_FIELD("exec.quote_scale", c.exec.quote_scale),
      EXECSIM_FIELD("exec.terminate_on_completion", c.exec.terminate_on_completion),

      EXECSIM_FIELD("dqn.hidden", c.dqn.hidden),
      detail::choice<dqn::OptimizerKind>(
      "dqn.optimizer", [](RunConfig& c) -> dqn::OptimizerKind& { return c.dqn.optimizer; },
      {{"adam", dqn::OptimizerKind::Adam}, {"sgd", dqn::OptimizerKind::Sgd}}),
      EXECSIM_FIELD("dqn.lr_start", c.dqn.lr_start),
      EXECSIM_FIELD("dqn.lr_end", c.dqn.lr_end),
      EXECSIM_FIELD("dqn.lr_steps", c.dqn.lr_steps),
      EXECSIM_FIELD("dqn.eps_start", c.dqn.eps_start),
      EXECSIM_FIELD("dqn.eps_end", c.dqn.eps_end),
      EXECSIM_FIELD("dqn.eps_steps", c.dqn.eps_steps),
      EXECSIM_FIELD("dqn.gamma", c.dqn.gamma),
      EXECSIM_FIELD("dqn.batch_size", c.dqn.batch_size),
      EXECSIM_FIELD("dqn.replay_capacity", c.dqn.replay_capacity),
      EXECSIM_FIELD("dqn.learning_starts", c.dqn.learning_starts),
      EXECSIM_FIELD("dqn.train_every", c.dqn.train_every),
      EXECSIM_FIELD("dqn.target_sync", c.dqn.target_sync),
      EXECSIM_FIELD("dqn.reward_scale", c.dqn.reward_scale),
      EXECSIM_FIELD("dqn.rolling_window", c.dqn.rolling_window),

      EXECSIM_FIELD("train.episodes", c.train.episodes),
      EXECSIM_FIELD("train.checkpoint_every", c.train.checkpoint_every),

      EXECSIM_FIELD("eval.episodes", c.eval.episodes),
      EXECSIM_FIELD("eval.bins", c.eval.bins),
      bind("eval.parallel", [](RunConfig& c) -> auto& { return c.eval.parallel; }, false),
      EXECSIM_FIELD("eval.policies", c.eval.policies),
      EXECSIM_FIELD("eval.checkpoint", c.eval.checkpoint),

      EXECSIM_FIELD("benchmark.noise", c.benchmark.noise),
      EXECSIM_FIELD("benchmark.momentum_fixed", c.benchmark.momentum_fixed),
      EXECSIM_FIELD("benchmark.momentum", c.benchmark.momentum),
      EXECSIM_FIELD("benchmark.noise_fixed", c.benchmark.noise_fixed),
      EXECSIM_FIELD("benchmark.train_episodes", c.benchmark.train_episodes),

      EXECSIM_FIELD("simulate.duration_s", c.simulate.duration_s),
      EXECSIM_FIELD("simulate.n_seeds", c.simulate.n_seeds),
      EXECSIM_FIELD("simulate.depth", c.simulate.depth),
  };
  return f;
}

#undef EXECSIM_FIELD

inline const Field* find_field(std::string_view key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

// Applies one "key = value" assignment.
inline void set_key(RunConfig& c, std::string_view key, std::string_view value) {
  const auto* f = find_field(detail::trim(key));
  if (!f) throw ConfigError("unknown config key '" + std::string(detail::trim(key)) + "'");
  try {
    f->set(c, value);
  } catch (const ConfigError& e) {
    throw ConfigError(f->key + ": " + e.what());
  }
}

// "key = value" lines; '#' starts a comment; later assignments win.
inline void apply_config(RunConfig& c, std::istream& is, std::string_view source = "config") {
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    std::string_view s = line;
    if (const auto h = s.find('#'); h != std::string_view::npos) s = s.substr(0, h);
    s = detail::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    const std::string where = std::string(source) + ":" + std::to_string(n) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    try {
      set_key(c, s.substr(0, eq), s.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

inline RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::istringstream is{std::string(text)};
  apply_config(c, is);
  return c;
}

// Canonical effective config; parses back to the same values.
inline std::string dump_config(const RunConfig& c, bool hashed_only = false) {
  std::string s;
  for (const auto& f : fields())
    if (!hashed_only || f.hashed) s += f.key + " = " + f.get(c) + "\n";
  return s;
}

inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a64(dump_config(c, true))); }

}  // namespace execsim::cli
