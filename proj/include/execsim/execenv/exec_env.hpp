#pragma once

#include <execsim/execenv/venue.hpp>
#include <execsim/util/hash.hpp>

#include <algorithm>
#include <cstdio>
#include <deque>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace execsim::execenv {

enum class Direction { Buy, Sell };

inline const char* to_string(Direction d) noexcept { return d == Direction::Buy ? "buy" : "sell"; }

// Side of the parent order's own market orders (and of its imbalance features).
inline Side parent_side(Direction d) noexcept { return d == Direction::Buy ? Side::Bid : Side::Ask; }

struct ExecConfig {
  Qty parent_size{20000};
  Direction direction{Direction::Buy};
  double time_window_s{1800.0};
  double step_dt_s{1.0};
  Qty q_min{20};
  int n_size_actions{4};
  double alpha{2.0};              // per level walked beyond the touch
  double beta{5.0};               // per share left at the end of the window
  double over_exec_penalty{5.0};  // per share executed beyond the parent size
  int history{4};
  int buffer_length{50};
  bool relative_quotes{true};     // quotes as (px - P0) / quote_scale instead of raw cents
  double quote_scale{10.0};
  // When false the episode always runs to the end of the window; steps after
  // completion are forced to action 0 with zero reward.
  bool terminate_on_completion{true};

  static constexpr int kFrameSize = 9;

  [[nodiscard]] Timestamp step_ns() const { return seconds_to_ns(step_dt_s); }
  [[nodiscard]] Timestamp window_ns() const { return seconds_to_ns(time_window_s); }
  [[nodiscard]] int n_steps() const { return static_cast<int>(window_ns() / step_ns()); }
  [[nodiscard]] int n_actions() const { return n_size_actions + 1; }
  [[nodiscard]] int obs_dim() const { return history * kFrameSize; }

  void validate() const {
    if (parent_size < 1) throw ConfigError("exec: parent_size must be > 0");
    if (q_min < 1 || n_size_actions < 1) throw ConfigError("exec: q_min and n_size_actions must be >= 1");
    if (step_ns() <= 0 || window_ns() <= 0) throw ConfigError("exec: time_window and step_dt must be > 0");
    if (window_ns() % step_ns() != 0) throw ConfigError("exec: time_window must be a whole number of steps");
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !(over_exec_penalty >= 0.0)) throw ConfigError("exec: penalties must be >= 0");
    if (history < 1 || buffer_length < 1) throw ConfigError("exec: history and buffer_length must be >= 1");
    if (!(quote_scale > 0.0)) throw ConfigError("exec: quote_scale must be > 0");
    if (q_min * n_size_actions * static_cast<Qty>(n_steps()) < parent_size)
      throw ConfigError("exec: parent order cannot be completed even at the largest action every step");
  }
};

struct RewardTerms {
  double shortfall{0.0};
  double depth{0.0};
  double terminal{0.0};
  double over_exec{0.0};
  [[nodiscard]] double total() const noexcept { return shortfall + depth + terminal + over_exec; }
};

struct StepInfo {
  int t{0};  // decision step index, 0-based
  int action{0};
  Qty requested{0};
  Qty filled{0};
  std::optional<double> avg_price;
  int depth_consumed{0};
  Qty executed{0};
  Qty inventory{0};
  RewardTerms terms;
  // Book at the decision instant, before the order.
  std::optional<Price> best_bid;
  std::optional<Price> best_ask;
  double imbalance_1{0.5};
};

struct StepOutcome {
  std::vector<double> observation;
  double reward{0.0};
  bool done{false};
  StepInfo info;
};

// Whole-episode accounting.
struct EpisodeStats {
  Qty parent_size{0};
  Direction direction{Direction::Buy};
  double arrival_price{0.0};
  Qty executed{0};
  Qty notional{0};  // sum of price * qty over own fills, cents * shares
  long long depth_sum{0};
  Qty excess{0};
  Qty final_inventory{0};
  int steps{0};
  int n_steps{0};
  std::optional<int> completion_step;  // 0-based step at which executed reached X0
  RewardTerms terms;
  double total_reward{0.0};
  double alpha{0.0}, beta{0.0}, over_exec_penalty{0.0};

  // (X_exec P0 - sum P dx) / X0 for a buy, sign flipped for a sell. Cents per share;
  // positive means better than arrival.
  [[nodiscard]] double normalized_is() const {
    const double raw = static_cast<double>(executed) * arrival_price - static_cast<double>(notional);
    return (direction == Direction::Buy ? raw : -raw) / static_cast<double>(parent_size);
  }
  // Depth, terminal and over-execution penalties per parent share (non-positive).
  [[nodiscard]] double normalized_penalty() const {
    return -(alpha * static_cast<double>(depth_sum) + beta * static_cast<double>(final_inventory) +
             over_exec_penalty * static_cast<double>(excess)) /
           static_cast<double>(parent_size);
  }
  [[nodiscard]] double time_fraction() const {
    if (!completion_step) return 1.0;
    return static_cast<double>(*completion_step + 1) / static_cast<double>(n_steps);
  }
};

struct TraceRow {
  int t;
  int action;
  Qty filled;
  std::optional<double> avg_price;
  int depth_consumed;
  double reward;
  Qty inventory;
  std::optional<Price> best_bid;
  std::optional<Price> best_ask;
};

inline constexpr const char* kTraceHeader = "t,action,filled,avg_price,d_t,reward,inventory,best_bid,best_ask";

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows, std::string_view config_hash) {
  os << config_hash_line(config_hash) << kTraceHeader << '\n';
  char buf[64];
  for (const auto& r : rows) {
    os << r.t << ',' << r.action << ',' << r.filled << ',';
    if (r.avg_price) {
      std::snprintf(buf, sizeof buf, "%.10g", *r.avg_price);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%.10g", r.reward);
    os << ',' << r.depth_consumed << ',' << buf << ',' << r.inventory << ',';
    if (r.best_bid) os << *r.best_bid;
    os << ',';
    if (r.best_ask) os << *r.best_ask;
    os << '\n';
  }
}

// Execution MDP over a venue: one step per step_dt, market-order actions of
// q_min * k shares, stacked 9-feature observations.
class ExecEnv {
 public:
  ExecEnv(ExecConfig cfg, std::unique_ptr<Venue> venue) : cfg_((cfg.validate(), cfg)), venue_(std::move(venue)) {
    if (!venue_) throw std::invalid_argument("exec env: null venue");
  }

  [[nodiscard]] const ExecConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] Venue& venue() noexcept { return *venue_; }
  [[nodiscard]] int obs_dim() const noexcept { return cfg_.obs_dim(); }
  [[nodiscard]] int n_actions() const noexcept { return cfg_.n_actions(); }
  [[nodiscard]] bool done() const noexcept { return done_; }
  [[nodiscard]] bool completed() const noexcept { return stats_.executed >= cfg_.parent_size; }
  [[nodiscard]] int step_index() const noexcept { return step_; }
  [[nodiscard]] double arrival_price() const noexcept { return stats_.arrival_price; }
  [[nodiscard]] const std::vector<double>& observation() const noexcept { return obs_; }
  [[nodiscard]] const std::deque<lob::BookSnapshot>& market_data() const noexcept { return buffer_; }
  [[nodiscard]] const EpisodeStats& stats() const noexcept { return stats_; }
  [[nodiscard]] const std::vector<TraceRow>& trace() const noexcept { return trace_; }
  [[nodiscard]] const std::vector<lob::Fill>& fills() const noexcept { return fills_; }
  [[nodiscard]] Qty inventory() const noexcept { return std::max<Qty>(0, cfg_.parent_size - stats_.executed); }

  const std::vector<double>& reset(std::uint64_t seed) {
    venue_->reset(seed);
    if (venue_->book().max_depth() < 5) throw ConfigError("exec: venue book depth must be >= 5");
    if (venue_->time_available() < cfg_.window_ns())
      throw ConfigError("exec: session ends before the execution window");
    const auto& b = venue_->book();
    stats_ = EpisodeStats{};
    stats_.parent_size = cfg_.parent_size;
    stats_.direction = cfg_.direction;
    stats_.n_steps = cfg_.n_steps();
    stats_.alpha = cfg_.alpha;
    stats_.beta = cfg_.beta;
    stats_.over_exec_penalty = cfg_.over_exec_penalty;
    stats_.arrival_price = b.mid_price() ? *b.mid_price() : venue_->reference_price();
    last_bid_ = b.best_bid() ? static_cast<double>(*b.best_bid()) : stats_.arrival_price;
    last_ask_ = b.best_ask() ? static_cast<double>(*b.best_ask()) : stats_.arrival_price;
    step_ = 0;
    done_ = false;
    trace_.clear();
    fills_.clear();
    buffer_.clear();
    const auto f = frame();
    obs_.clear();
    for (int h = 0; h < cfg_.history; ++h) obs_.insert(obs_.end(), f.begin(), f.end());
    return obs_;
  }

  StepOutcome step(int action) {
    if (done_) throw std::logic_error("exec env: step() after episode end");
    if (action < 0 || action >= n_actions()) throw std::out_of_range("exec env: action out of range");
    if (completed()) action = 0;  // only reachable without terminate_on_completion

    const auto& b = venue_->book();
    StepInfo info;
    info.t = step_;
    info.action = action;
    info.best_bid = b.best_bid();
    info.best_ask = b.best_ask();
    info.imbalance_1 = b.volume_imbalance(parent_side(cfg_.direction), 1);

    if (action > 0) {
      info.requested = cfg_.q_min * action;
      auto r = venue_->execute(parent_side(cfg_.direction), info.requested);
      info.filled = r.filled;
      if (r.filled > 0) {
        info.avg_price = r.avg_price();
        info.depth_consumed = r.depth_consumed;
        const double raw = static_cast<double>(r.filled) * stats_.arrival_price - static_cast<double>(r.notional);
        info.terms.shortfall = cfg_.direction == Direction::Buy ? raw : -raw;
        info.terms.depth = -cfg_.alpha * r.depth_consumed;
        const Qty before = stats_.executed;
        stats_.executed += r.filled;
        stats_.notional += r.notional;
        stats_.depth_sum += r.depth_consumed;
        fills_.insert(fills_.end(), r.fills.begin(), r.fills.end());
        if (stats_.executed > cfg_.parent_size) {
          const Qty excess = stats_.executed - std::max(before, cfg_.parent_size);
          stats_.excess += excess;
          info.terms.over_exec = -cfg_.over_exec_penalty * static_cast<double>(excess);
        }
        if (before < cfg_.parent_size && stats_.executed >= cfg_.parent_size) stats_.completion_step = step_;
      }
    }

    venue_->advance(cfg_.step_ns());
    ++step_;
    const bool at_end = step_ >= cfg_.n_steps();
    if (at_end) {
      stats_.final_inventory = inventory();
      info.terms.terminal = -cfg_.beta * static_cast<double>(stats_.final_inventory);
    }
    done_ = at_end || (completed() && cfg_.terminate_on_completion);
    stats_.steps = step_;
    if (done_ && !at_end) stats_.final_inventory = inventory();

    info.executed = stats_.executed;
    info.inventory = inventory();
    stats_.terms.shortfall += info.terms.shortfall;
    stats_.terms.depth += info.terms.depth;
    stats_.terms.terminal += info.terms.terminal;
    stats_.terms.over_exec += info.terms.over_exec;
    const double reward = info.terms.total();
    stats_.total_reward += reward;

    trace_.push_back(TraceRow{info.t, info.action, info.filled, info.avg_price, info.depth_consumed, reward,
                              info.inventory, info.best_bid, info.best_ask});

    const auto f = frame();
    obs_.erase(obs_.begin(), obs_.begin() + ExecConfig::kFrameSize);
    obs_.insert(obs_.end(), f.begin(), f.end());
    return StepOutcome{obs_, reward, done_, info};
  }

 private:
  // [holdings left, time left, imbalance k=1..5, best bid, best ask]
  std::vector<double> frame() {
    const auto& b = venue_->book();
    buffer_.push_back(b.snapshot(std::min(b.max_depth(), 10), venue_->now()));
    while (static_cast<int>(buffer_.size()) > cfg_.buffer_length) buffer_.pop_front();

    std::vector<double> f(ExecConfig::kFrameSize);
    const double x0 = static_cast<double>(cfg_.parent_size);
    f[0] = std::clamp(1.0 - static_cast<double>(stats_.executed) / x0, 0.0, 1.0);
    f[1] = 1.0 - static_cast<double>(step_) / static_cast<double>(cfg_.n_steps());
    const Side side = parent_side(cfg_.direction);
    for (int k = 1; k <= 5; ++k) f[static_cast<std::size_t>(1 + k)] = b.volume_imbalance(side, k);
    if (auto bid = b.best_bid()) last_bid_ = static_cast<double>(*bid);
    if (auto ask = b.best_ask()) last_ask_ = static_cast<double>(*ask);
    f[7] = quote_feature(last_bid_);
    f[8] = quote_feature(last_ask_);
    return f;
  }

  [[nodiscard]] double quote_feature(double px) const {
    return cfg_.relative_quotes ? (px - stats_.arrival_price) / cfg_.quote_scale : px;
  }

  ExecConfig cfg_;
  std::unique_ptr<Venue> venue_;
  EpisodeStats stats_;
  std::vector<double> obs_;
  std::deque<lob::BookSnapshot> buffer_;
  std::vector<TraceRow> trace_;
  std::vector<lob::Fill> fills_;
  double last_bid_{0.0};
  double last_ask_{0.0};
  int step_{0};
  bool done_{true};
};

// Everything needed to build an environment; copyable so workers can build their own.
struct EnvSpec {
  ExecConfig exec;
  VenueConfig venue;
};

inline ExecEnv make_env(const EnvSpec& spec) { return ExecEnv(spec.exec, make_venue(spec.venue)); }

}  // namespace execsim::execenv
