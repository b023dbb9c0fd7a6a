#pragma once

#include <execsim/dqn/network.hpp>
#include <execsim/execenv/exec_env.hpp>
#include <execsim/market/rng.hpp>
#include <execsim/util/errors.hpp>

#include <array>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace execsim::strategies {

using execenv::ExecConfig;
using lob::Qty;

class Policy {
 public:
  virtual ~Policy() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  // Called once per episode before the first action.
  virtual void begin_episode(const ExecConfig& cfg, std::uint64_t seed) = 0;
  virtual int act(int step, std::span<const double> obs) = 0;
};

// Evenly spaced children of q_min shares: child j goes out at step floor(j N / C),
// C = floor(X0 / q_min). Any residue below q_min is left to the terminal penalty.
class TwapPolicy final : public Policy {
 public:
  std::string name() const override { return "twap"; }

  void begin_episode(const ExecConfig& cfg, std::uint64_t) override {
    n_steps_ = cfg.n_steps();
    children_ = cfg.parent_size / cfg.q_min;
    if (children_ > static_cast<Qty>(cfg.n_size_actions) * n_steps_)
      throw ConfigError("twap: more children than the window can carry");
  }

  // Children due at step k: ceil((k+1) C / N) - ceil(k C / N).
  [[nodiscard]] int children_at(int k) const {
    auto ceil_div = [](Qty a, Qty b) { return (a + b - 1) / b; };
    const Qty n = n_steps_;
    return static_cast<int>(ceil_div((k + 1) * children_, n) - ceil_div(k * children_, n));
  }

  int act(int step, std::span<const double>) override {
    if (step < 0 || step >= n_steps_) return 0;
    return children_at(step);
  }

  [[nodiscard]] Qty children() const noexcept { return children_; }

 private:
  int n_steps_{0};
  Qty children_{0};
};

// With probability noop_prob do nothing; otherwise pick uniformly from
// `choices`. Draws are a pure function of (episode seed, step).
class TwoStagePolicy final : public Policy {
 public:
  TwoStagePolicy(std::string name, double noop_prob, std::vector<int> choices)
      : name_(std::move(name)), noop_prob_(noop_prob), choices_(std::move(choices)) {
    if (!(noop_prob >= 0.0 && noop_prob <= 1.0) || choices_.empty())
      throw ConfigError("policy " + name_ + ": noop probability must lie in [0, 1] with at least one choice");
  }

  std::string name() const override { return name_; }
  void begin_episode(const ExecConfig& cfg, std::uint64_t seed) override {
    for (int c : choices_)
      if (c < 0 || c >= cfg.n_actions()) throw ConfigError("policy " + name_ + ": action outside the action space");
    seed_ = seed;
  }

  int act(int step, std::span<const double>) override {
    const auto k = static_cast<std::uint64_t>(step);
    if (hash_uniform(seed_, 2 * k) < noop_prob_) return 0;
    const double u = hash_uniform(seed_, 2 * k + 1);
    const auto i = std::min(choices_.size() - 1, static_cast<std::size_t>(u * static_cast<double>(choices_.size())));
    return choices_[i];
  }

  // Implied distribution over actions 0..n_actions-1.
  [[nodiscard]] std::vector<double> probabilities(int n_actions) const {
    std::vector<double> p(static_cast<std::size_t>(n_actions), 0.0);
    p[0] += noop_prob_;
    for (int c : choices_) p[static_cast<std::size_t>(c)] += (1.0 - noop_prob_) / static_cast<double>(choices_.size());
    return p;
  }

 private:
  std::string name_;
  double noop_prob_;
  std::vector<int> choices_;
  std::uint64_t seed_{0};
};

struct PassiveParams {
  double noop_prob{0.6};
  std::vector<int> choices{1, 2, 3, 4};
};

// The second stage includes "do nothing" again, so P(0) = 0.5 + 0.5 / 4.
struct RandomParams {
  double noop_prob{0.5};
  std::vector<int> choices{0, 1, 2, 3};
};

inline std::unique_ptr<Policy> make_passive(const PassiveParams& p = {}) {
  return std::make_unique<TwoStagePolicy>("passive", p.noop_prob, p.choices);
}
inline std::unique_ptr<Policy> make_random(const RandomParams& p = {}) {
  return std::make_unique<TwoStagePolicy>("random", p.noop_prob, p.choices);
}

// Greedy argmax of a frozen Q-network; the network may be shared across threads.
class RlPolicy final : public Policy {
 public:
  explicit RlPolicy(std::shared_ptr<const dqn::QNetwork> net) : net_(std::move(net)) {
    if (!net_) throw std::invalid_argument("rl policy: null network");
  }
  std::string name() const override { return "rl"; }
  void begin_episode(const ExecConfig& cfg, std::uint64_t) override {
    if (net_->input_size() != cfg.obs_dim() || net_->output_size() != cfg.n_actions())
      throw ConfigError("rl policy: network shape does not match the environment");
  }
  int act(int, std::span<const double> obs) override { return dqn::argmax(net_->forward(obs)); }

 private:
  std::shared_ptr<const dqn::QNetwork> net_;
};

}  // namespace execsim::strategies
