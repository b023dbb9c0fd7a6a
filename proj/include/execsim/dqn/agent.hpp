#pragma once

#include <execsim/dqn/network.hpp>
#include <execsim/dqn/replay.hpp>
#include <execsim/execenv/exec_env.hpp>
#include <execsim/util/errors.hpp>
#include <execsim/util/hash.hpp>

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace execsim::dqn {

// Linear interpolation from start to end over `steps`, flat afterwards.
struct LinearSchedule {
  double start{0.0};
  double end{0.0};
  long long steps{1};

  [[nodiscard]] double operator()(long long t) const {
    if (steps <= 0 || t >= steps) return end;
    if (t <= 0) return start;
    return start + (end - start) * (static_cast<double>(t) / static_cast<double>(steps));
  }
};

struct DqnConfig {
  std::vector<int> hidden{50, 20};
  OptimizerKind optimizer{OptimizerKind::Adam};
  double lr_start{1e-3};
  double lr_end{0.0};
  long long lr_steps{90000};  // gradient steps
  double eps_start{1.0};
  double eps_end{0.02};
  long long eps_steps{10000};  // environment steps
  double gamma{0.9999};
  int batch_size{64};
  std::size_t replay_capacity{100000};
  std::size_t learning_starts{1000};
  int train_every{1};
  int target_sync{0};  // gradient steps between target copies; 0 = bootstrap from the online net
  double reward_scale{1.0};  // applied to stored rewards only
  int rolling_window{100};

  void validate() const {
    for (int h : hidden)
      if (h < 1) throw ConfigError("dqn: hidden sizes must be >= 1");
    if (!(lr_start >= 0.0) || !(lr_end >= 0.0)) throw ConfigError("dqn: learning rates must be >= 0");
    if (!(eps_start >= 0.0 && eps_start <= 1.0 && eps_end >= 0.0 && eps_end <= 1.0))
      throw ConfigError("dqn: epsilon must lie in [0, 1]");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("dqn: gamma must lie in [0, 1]");
    if (batch_size < 1 || train_every < 1 || target_sync < 0 || rolling_window < 1)
      throw ConfigError("dqn: batch_size, train_every, rolling_window must be >= 1 and target_sync >= 0");
    if (replay_capacity < static_cast<std::size_t>(batch_size)) throw ConfigError("dqn: replay smaller than a batch");
    if (!(reward_scale > 0.0)) throw ConfigError("dqn: reward_scale must be > 0");
    if (lr_steps < 0 || eps_steps < 0) throw ConfigError("dqn: schedule lengths must be >= 0");
  }

  [[nodiscard]] LinearSchedule lr_schedule() const { return {lr_start, lr_end, lr_steps}; }
  [[nodiscard]] LinearSchedule eps_schedule() const { return {eps_start, eps_end, eps_steps}; }
};

// y_j = r_j if done, else r_j + gamma * max_a Q_target(s'_j, a).
inline std::vector<double> td_targets(const std::vector<const Transition*>& batch, const QNetwork& target, double gamma) {
  std::vector<double> y;
  y.reserve(batch.size());
  for (const auto* t : batch) {
    double v = t->r;
    if (!t->done && gamma != 0.0) {
      const auto q = target.forward(t->s_next);
      v += gamma * *std::max_element(q.begin(), q.end());
    }
    y.push_back(v);
  }
  return y;
}

// Mean squared TD error over the taken actions and its gradient.
inline double td_loss_and_grad(const QNetwork& net, const std::vector<const Transition*>& batch,
                               const std::vector<double>& y, std::vector<double>* grad) {
  if (batch.empty()) throw std::invalid_argument("td loss: empty batch");
  const double n = static_cast<double>(batch.size());
  if (grad) grad->assign(net.params().size(), 0.0);
  double loss = 0.0;
  QNetwork::Tape tape;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto& t = *batch[j];
    if (t.a < 0 || t.a >= net.output_size()) throw std::out_of_range("td loss: action out of range");
    const auto q = grad ? net.forward(t.s, tape) : net.forward(t.s);
    const double err = q[static_cast<std::size_t>(t.a)] - y[j];
    loss += err * err / n;
    if (grad) {
      std::vector<double> delta(q.size(), 0.0);
      delta[static_cast<std::size_t>(t.a)] = 2.0 * err / n;
      net.backward(tape, std::move(delta), *grad);
    }
  }
  return loss;
}

// One optimizer update; returns the loss before the update.
inline double gradient_step(QNetwork& net, Optimizer& opt, const std::vector<const Transition*>& batch,
                            const std::vector<double>& y, double lr) {
  if (!(lr >= 0.0)) throw std::invalid_argument("gradient_step: lr must be >= 0");
  std::vector<double> grad;
  const double loss = td_loss_and_grad(net, batch, y, &grad);
  if (!std::isfinite(loss)) throw NonFiniteError("gradient_step: non-finite loss");
  opt.apply(net.params(), grad, lr);
  if (!net.all_finite()) throw NonFiniteError("gradient_step: non-finite parameters after update");
  return loss;
}

// Uniform random action with probability eps, else greedy.
inline int epsilon_greedy(const QNetwork& net, std::span<const double> s, double eps, Rng& rng) {
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < eps)
    return std::uniform_int_distribution<int>(0, net.output_size() - 1)(rng);
  return argmax(net.forward(s));
}

struct CurvePoint {
  long long episode{0};
  double total_reward{0.0};
  double rolling_mean{0.0};
};

inline void write_learning_curve_csv(std::ostream& os, const std::vector<CurvePoint>& curve, std::string_view config_hash) {
  os << config_hash_line(config_hash) << "episode,total_reward,rolling_mean\n";
  char buf[96];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%lld,%.10g,%.10g\n", p.episode, p.total_reward, p.rolling_mean);
    os << buf;
  }
}

// Online network, optional target copy, optimizer, replay and all counters.
class DqnAgent {
 public:
  DqnAgent(DqnConfig cfg, int obs_dim, int n_actions, std::uint64_t seed)
      : cfg_((cfg.validate(), std::move(cfg))),
        replay_(cfg_.replay_capacity),
        act_rng_(derive_seed(seed, 1)),
        sample_rng_(derive_seed(seed, 2)) {
    std::vector<int> sizes{obs_dim};
    sizes.insert(sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    sizes.push_back(n_actions);
    net_ = QNetwork(sizes);
    Rng init_rng(derive_seed(seed, 3));
    net_.init(init_rng);
    target_ = net_;
    opt_ = Optimizer(cfg_.optimizer, net_.params().size());
  }

  [[nodiscard]] const DqnConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const QNetwork& net() const noexcept { return net_; }
  [[nodiscard]] QNetwork& net() noexcept { return net_; }
  [[nodiscard]] const ReplayMemory& replay() const noexcept { return replay_; }
  [[nodiscard]] long long env_steps() const noexcept { return env_steps_; }
  [[nodiscard]] long long grad_steps() const noexcept { return grad_steps_; }
  [[nodiscard]] long long episodes() const noexcept { return static_cast<long long>(curve_.size()); }
  [[nodiscard]] const std::vector<CurvePoint>& curve() const noexcept { return curve_; }
  [[nodiscard]] double epsilon() const { return cfg_.eps_schedule()(env_steps_); }
  [[nodiscard]] double learning_rate() const { return cfg_.lr_schedule()(grad_steps_); }
  [[nodiscard]] std::optional<double> last_loss() const noexcept { return last_loss_; }

  // Throws if the environment's shape does not match the network.
  void check_shape(int obs_dim, int n_actions) const {
    if (obs_dim != net_.input_size() || n_actions != net_.output_size())
      throw ConfigError("dqn: network shape does not match the environment (obs " + std::to_string(obs_dim) +
                        ", actions " + std::to_string(n_actions) + ")");
  }

  int act(std::span<const double> s) { return epsilon_greedy(net_, s, epsilon(), act_rng_); }

  // Stores a transition, advances the step counter and trains when due.
  void observe(std::span<const double> s, int a, double reward, std::span<const double> s_next, bool done) {
    replay_.push(Transition{{s.begin(), s.end()}, a, reward * cfg_.reward_scale, {s_next.begin(), s_next.end()}, done});
    ++env_steps_;
    const auto bs = static_cast<std::size_t>(cfg_.batch_size);
    if (replay_.size() >= std::max(cfg_.learning_starts, bs) && env_steps_ % cfg_.train_every == 0) {
      const auto batch = replay_.sample(bs, sample_rng_);
      const auto y = td_targets(batch, cfg_.target_sync > 0 ? target_ : net_, cfg_.gamma);
      last_loss_ = gradient_step(net_, opt_, batch, y, learning_rate());
      ++grad_steps_;
      if (cfg_.target_sync > 0 && grad_steps_ % cfg_.target_sync == 0) target_ = net_;
    }
  }

  void end_episode(double total_reward) {
    CurvePoint p;
    p.episode = episodes() + 1;
    p.total_reward = total_reward;
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(cfg_.rolling_window), curve_.size() + 1);
    double sum = total_reward;
    for (std::size_t i = curve_.size() + 1 - w; i < curve_.size(); ++i) sum += curve_[i].total_reward;
    p.rolling_mean = sum / static_cast<double>(w);
    curve_.push_back(p);
  }

  // Replay contents are not saved; a resumed run refills the buffer.
  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "execsim-dqn";
    j["version"] = 1;
    j["sizes"] = net_.sizes();
    j["params"] = net_.params();
    j["target_params"] = target_.params();
    j["optimizer"] = {{"kind", to_string(opt_.kind())}, {"t", opt_.t()}, {"m", opt_.m()}, {"v", opt_.v()}};
    j["env_steps"] = env_steps_;
    j["grad_steps"] = grad_steps_;
    std::ostringstream a, s;
    a << act_rng_;
    s << sample_rng_;
    j["rng"] = {{"act", a.str()}, {"sample", s.str()}};
    nlohmann::json rewards = nlohmann::json::array();
    for (const auto& p : curve_) rewards.push_back(p.total_reward);
    j["episode_rewards"] = rewards;
    return j;
  }

  void load_json(const nlohmann::json& j) {
    if (j.value("format", "") != "execsim-dqn" || j.value("version", 0) != 1)
      throw ConfigError("dqn: not a checkpoint of a supported version");
    if (j.at("sizes").get<std::vector<int>>() != net_.sizes())
      throw ConfigError("dqn: checkpoint layer sizes do not match the configured network");
    net_.params() = j.at("params").get<std::vector<double>>();
    target_.params() = j.at("target_params").get<std::vector<double>>();
    if (net_.params().size() != target_.params().size() || !net_.all_finite())
      throw ConfigError("dqn: corrupt checkpoint parameters");
    const auto& o = j.at("optimizer");
    if (o.at("kind").get<std::string>() != to_string(opt_.kind()))
      throw ConfigError("dqn: checkpoint optimizer differs from the configured one");
    opt_.restore(o.at("t").get<long long>(), o.at("m").get<std::vector<double>>(), o.at("v").get<std::vector<double>>());
    env_steps_ = j.at("env_steps").get<long long>();
    grad_steps_ = j.at("grad_steps").get<long long>();
    std::istringstream a(j.at("rng").at("act").get<std::string>()), s(j.at("rng").at("sample").get<std::string>());
    a >> act_rng_;
    s >> sample_rng_;
    curve_.clear();
    for (double r : j.at("episode_rewards").get<std::vector<double>>()) end_episode(r);
  }

  void save(const std::filesystem::path& path) const {
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream os(tmp);
      if (!os) throw std::runtime_error("dqn: cannot write " + tmp);
      os << to_json().dump() << '\n';
    }
    std::filesystem::rename(tmp, path);
  }

  void load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("dqn: cannot read checkpoint " + path.string());
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("dqn: malformed checkpoint: ") + e.what());
    }
    load_json(j);
  }

 private:
  DqnConfig cfg_;
  QNetwork net_;
  QNetwork target_;
  Optimizer opt_;
  ReplayMemory replay_;
  Rng act_rng_;
  Rng sample_rng_;
  long long env_steps_{0};
  long long grad_steps_{0};
  std::optional<double> last_loss_;
  std::vector<CurvePoint> curve_;
};

// Loads just the network from a checkpoint, for greedy evaluation.
inline QNetwork load_network(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("dqn: cannot read checkpoint " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dqn: malformed checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "execsim-dqn") throw ConfigError("dqn: not a checkpoint");
  QNetwork net(j.at("sizes").get<std::vector<int>>());
  auto p = j.at("params").get<std::vector<double>>();
  if (p.size() != net.params().size()) throw ConfigError("dqn: corrupt checkpoint parameters");
  net.params() = std::move(p);
  return net;
}

inline std::uint64_t training_episode_seed(std::uint64_t seed, long long episode) {
  return derive_seed(seed, static_cast<std::uint64_t>(episode), 0x7EA1);
}

struct TrainHooks {
  // Called after each finished episode (1-based count so far).
  std::function<void(const DqnAgent&)> on_episode;
};

// Runs `episodes` more episodes. Episode seeds continue from the agent's count,
// so a resumed run keeps its numbering.
inline void train(DqnAgent& agent, execenv::ExecEnv& env, long long episodes, std::uint64_t seed,
                  const TrainHooks& hooks = {}) {
  agent.check_shape(env.obs_dim(), env.n_actions());
  for (long long e = 0; e < episodes; ++e) {
    const long long index = agent.episodes();
    std::vector<double> s = env.reset(training_episode_seed(seed, index));
    double total = 0.0;
    bool done = false;
    while (!done) {
      const int a = agent.act(s);
      auto out = env.step(a);
      total += out.reward;
      try {
        agent.observe(s, a, out.reward, out.observation, out.done);
      } catch (const NonFiniteError& err) {
        throw NonFiniteError(std::string(err.what()) + " (episode " + std::to_string(index + 1) + ", step " +
                             std::to_string(out.info.t) + ")");
      }
      s = std::move(out.observation);
      done = out.done;
    }
    agent.end_episode(total);
    if (hooks.on_episode) hooks.on_episode(agent);
  }
}

// Q-values at each observation of a recorded episode.
inline std::vector<std::vector<double>> q_value_trace(const QNetwork& net, const std::vector<std::vector<double>>& observations) {
  std::vector<std::vector<double>> out;
  out.reserve(observations.size());
  for (const auto& s : observations) out.push_back(net.forward(s));
  return out;
}

inline void write_q_trace_csv(std::ostream& os, const std::vector<std::vector<double>>& trace, std::string_view config_hash) {
  os << config_hash_line(config_hash) << "t";
  const std::size_t n = trace.empty() ? 0 : trace.front().size();
  for (std::size_t a = 0; a < n; ++a) os << ",q" << a;
  os << '\n';
  char buf[40];
  for (std::size_t t = 0; t < trace.size(); ++t) {
    os << t;
    for (double q : trace[t]) {
      std::snprintf(buf, sizeof buf, ",%.10g", q);
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace execsim::dqn
