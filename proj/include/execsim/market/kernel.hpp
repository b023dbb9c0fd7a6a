#pragma once

#include <execsim/lob/order_book.hpp>
#include <execsim/market/agents.hpp>
#include <execsim/market/fundamental.hpp>
#include <execsim/market/rng.hpp>
#include <execsim/util/errors.hpp>

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace execsim::market {

using lob::Fill;
using lob::OrderBook;
using lob::OrderId;

using execsim::ConfigError;

struct AgentPopulation {
  int n_noise{1000};
  int n_value{102};
  int n_momentum{12};
  int n_market_maker{1};
};

struct MarketConfig {
  AgentPopulation population;
  FundamentalParams fundamental;
  NoiseAgentParams noise;
  ValueAgentParams value;
  MomentumAgentParams momentum;
  MarketMakerParams market_maker;
  double mm_obs_noise_var{0.0};
  Timestamp session_length{3600 * kNanosPerSecond};
  int book_depth{10};
  lob::DepthMode depth_mode{lob::DepthMode::Levels};
  int history_length{500};

  void validate() const {
    const auto& p = population;
    if (p.n_noise < 0 || p.n_value < 0 || p.n_momentum < 0 || p.n_market_maker < 0)
      throw ConfigError("market: agent counts must be >= 0");
    if (session_length < 0) throw ConfigError("market: session_length must be >= 0");
    if (book_depth < 1) throw ConfigError("market: book_depth must be >= 1");
    if (history_length < 1) throw ConfigError("market: history_length must be >= 1");
    if (!(mm_obs_noise_var >= 0.0)) throw ConfigError("market: mm_obs_noise_var must be >= 0");
    try {
      fundamental.validate();
      // Construct one of each class to run parameter checks.
      NoiseAgent(1, noise);
      ValueAgent(1, value);
      MomentumAgent(1, momentum);
      MarketMaker(1, market_maker);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("market: ") + e.what());
    }
  }
};

// Kernel event payloads.
struct AgentWakeup {
  AgentId agent;
};
struct OrderSubmission {
  AgentId agent;
  lob::OrderKind kind;
  Side side;
  Price price;  // ignored for market orders
  Qty qty;
};
struct CancelRequest {
  OrderId order_id;
};
struct KernelStop {};

struct SimEvent {
  Timestamp ts{0};
  std::uint64_t seq{0};
  std::variant<AgentWakeup, OrderSubmission, CancelRequest, KernelStop> payload;
};

struct FundamentalSample {
  Timestamp ts;
  double value;
};

// Everything a session leaves behind: one-second snapshots, every fill, and the
// fundamental sampled at snapshot times.
struct SessionLog {
  std::vector<lob::BookSnapshot> snapshots;
  std::vector<Fill> fills;
  std::vector<FundamentalSample> fundamental;
};

struct KernelHooks {
  std::function<void(const SimEvent&)> on_event;
  std::function<void(const lob::BookSnapshot&)> on_snapshot;
};

// Agent id reserved for orders that come from outside the background population.
inline constexpr AgentId kExternalAgentId = 0;

// Deterministic discrete-event market session. Agents are numbered from 1:
// market makers, then value, momentum and noise agents.
class MarketSimulation {
 public:
  MarketSimulation(const MarketConfig& cfg, std::uint64_t seed, KernelHooks hooks = {})
      : cfg_((cfg.validate(), cfg)),
        seed_(seed),
        hooks_(std::move(hooks)),
        book_(cfg.book_depth, cfg.depth_mode),
        fundamental_(cfg.fundamental, derive_seed(seed, 0xF0F0F0F0ULL), cfg.fundamental.mu) {
    build_population();
    push(cfg_.session_length, KernelStop{});
  }

  [[nodiscard]] Timestamp now() const noexcept { return now_; }
  [[nodiscard]] Timestamp session_end() const noexcept { return cfg_.session_length; }
  [[nodiscard]] const OrderBook& book() const noexcept { return book_; }
  [[nodiscard]] const MarketConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const SessionLog& log() const noexcept { return log_; }
  [[nodiscard]] SessionLog take_log() { return std::move(log_); }
  [[nodiscard]] std::optional<Price> last_trade() const noexcept { return last_trade_; }
  [[nodiscard]] std::size_t agent_count() const noexcept { return agents_.size(); }
  [[nodiscard]] const Agent& agent(AgentId id) const { return *agents_.at(static_cast<std::size_t>(id - 1)); }
  [[nodiscard]] const std::deque<lob::BookSnapshot>& history() const noexcept { return history_; }
  [[nodiscard]] bool stopped() const noexcept { return stopped_; }

  // Resting order ids owned by an agent.
  [[nodiscard]] std::vector<OrderId> open_orders(AgentId agent) const {
    std::vector<OrderId> out;
    if (auto it = own_orders_.find(agent); it != own_orders_.end()) {
      for (OrderId id : it->second)
        if (book_.is_resting(id)) out.push_back(id);
    }
    return out;
  }

  double fundamental_at(Timestamp t) { return fundamental_.at(t); }

  // Mid if the book is two-sided, else last trade, else the fundamental.
  [[nodiscard]] double reference_price() {
    if (auto m = book_.mid_price()) return *m;
    if (last_trade_) return static_cast<double>(*last_trade_);
    return fundamental_.at(now_);
  }

  // Volume traded over (now - window, now].
  [[nodiscard]] Qty window_volume(Timestamp window) const {
    if (volume_marks_.empty()) return 0;
    const Timestamp from = now_ - window;
    auto it = std::upper_bound(volume_marks_.begin(), volume_marks_.end(), from,
                               [](Timestamp t, const VolumeMark& m) { return t < m.ts; });
    const Qty before = it == volume_marks_.begin() ? 0 : std::prev(it)->cumulative;
    return volume_marks_.back().cumulative - before;
  }

  // Processes every event with ts <= t (never past the session end) and records
  // a snapshot at each whole second crossed.
  void advance_to(Timestamp t) {
    t = std::min(t, cfg_.session_length);
    if (t < now_) throw std::logic_error("advance_to: time must be non-decreasing");
    while (!queue_.empty() && !stopped_ && queue_.top().ts <= t) {
      record_snapshots_before(queue_.top().ts);
      SimEvent ev = queue_.top();
      queue_.pop();
      now_ = ev.ts;
      if (hooks_.on_event) hooks_.on_event(ev);
      dispatch(ev);
    }
    if (!stopped_) now_ = t;
    record_snapshots_through(now_);
  }

  void run_to_end() { advance_to(cfg_.session_length); }

  // Immediate market order at the current time on behalf of an external agent.
  lob::MarketResult submit_market(Side side, Qty qty, AgentId agent = kExternalAgentId) {
    auto r = book_.submit_market(side, qty, agent, now_, next_order_id_++);
    record_fills(r.fills);
    return r;
  }

  // Schedules an order or cancel for later processing by the kernel.
  void schedule(Timestamp ts, OrderSubmission sub) { push(ts, sub); }
  void schedule(Timestamp ts, CancelRequest req) { push(ts, req); }

 private:
  struct VolumeMark {
    Timestamp ts;
    Qty cumulative;
  };
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const noexcept {
      return a.ts != b.ts ? a.ts > b.ts : a.seq > b.seq;
    }
  };

  void build_population() {
    const auto& p = cfg_.population;
    AgentId id = 1;
    auto add = [&](std::unique_ptr<Agent> a, double obs_var) {
      const auto idx = static_cast<std::uint64_t>(a->id());
      rngs_.emplace_back(derive_seed(seed_, idx, 0));
      observers_.emplace_back(derive_seed(seed_, idx, 1), obs_var);
      agents_.push_back(std::move(a));
    };
    for (int i = 0; i < p.n_market_maker; ++i) add(std::make_unique<MarketMaker>(id++, cfg_.market_maker), cfg_.mm_obs_noise_var);
    for (int i = 0; i < p.n_value; ++i) add(std::make_unique<ValueAgent>(id++, cfg_.value), cfg_.value.obs_noise_var);
    for (int i = 0; i < p.n_momentum; ++i) add(std::make_unique<MomentumAgent>(id++, cfg_.momentum), 0.0);
    for (int i = 0; i < p.n_noise; ++i) add(std::make_unique<NoiseAgent>(id++, cfg_.noise), 0.0);
    for (std::size_t i = 0; i < agents_.size(); ++i) push(agents_[i]->first_wakeup(rngs_[i]), AgentWakeup{agents_[i]->id()});
  }

  template <class Payload>
  void push(Timestamp ts, Payload payload) {
    queue_.push(SimEvent{ts, next_event_seq_++, std::move(payload)});
  }

  void dispatch(const SimEvent& ev) {
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, KernelStop>) {
            stopped_ = true;
          } else if constexpr (std::is_same_v<T, AgentWakeup>) {
            wake(p.agent);
          } else if constexpr (std::is_same_v<T, OrderSubmission>) {
            if (p.kind == lob::OrderKind::Market) {
              submit_market(p.side, p.qty, p.agent);
            } else {
              place_limit(p.agent, p.side, p.price, p.qty);
            }
          } else {
            book_.cancel(p.order_id, now_);
          }
        },
        ev.payload);
  }

  void wake(AgentId id) {
    const auto idx = static_cast<std::size_t>(id - 1);
    Agent& agent = *agents_[idx];
    const auto snap = book_.snapshot(cfg_.book_depth, now_);
    WakeContext ctx;
    ctx.now = now_;
    ctx.session_end = cfg_.session_length;
    ctx.snapshot = &snap;
    ctx.mid_x2_history = mid_x2_history_;
    ctx.last_trade = last_trade_;
    ctx.window_volume = [this](Timestamp w) { return window_volume(w); };
    ctx.observe_fundamental = [this, idx] { return observers_[idx].observe(fundamental_, now_); };
    AgentActions acts = agent.wakeup(ctx, rngs_[idx]);
    for (const auto& a : acts.actions) {
      std::visit(
          [&](const auto& act) {
            using T = std::decay_t<decltype(act)>;
            if constexpr (std::is_same_v<T, PlaceLimit>) {
              place_limit(id, act.side, act.price, act.qty);
            } else if constexpr (std::is_same_v<T, PlaceMarket>) {
              submit_market(act.side, act.qty, id);
            } else {
              cancel_all(id);
            }
          },
          a);
    }
    if (acts.next_wakeup_delay) {
      const Timestamp next = now_ + *acts.next_wakeup_delay;
      if (next <= cfg_.session_length) push(next, AgentWakeup{id});
    }
  }

  void place_limit(AgentId agent, Side side, Price price, Qty qty) {
    const OrderId oid = next_order_id_++;
    auto r = book_.submit_limit(lob::Order{oid, agent, side, lob::OrderKind::Limit, price, qty, now_, 0});
    record_fills(r.fills);
    if (r.resting_qty > 0) own_orders_[agent].push_back(oid);
  }

  void cancel_all(AgentId agent) {
    auto it = own_orders_.find(agent);
    if (it == own_orders_.end()) return;
    for (OrderId oid : it->second) book_.cancel(oid, now_);
    it->second.clear();
  }

  void record_fills(const std::vector<Fill>& fills) {
    for (const auto& f : fills) {
      log_.fills.push_back(f);
      last_trade_ = f.price;
      const Qty cum = (volume_marks_.empty() ? 0 : volume_marks_.back().cumulative) + f.qty;
      if (!volume_marks_.empty() && volume_marks_.back().ts == f.ts) {
        volume_marks_.back().cumulative = cum;
      } else {
        volume_marks_.push_back({f.ts, cum});
      }
    }
  }

  // Snapshots at whole seconds strictly before ts (state after all events <= that second).
  void record_snapshots_before(Timestamp ts) {
    while (next_snapshot_ < ts && next_snapshot_ <= cfg_.session_length) take_snapshot();
  }
  void record_snapshots_through(Timestamp t) {
    while (next_snapshot_ <= t) take_snapshot();
  }

  void take_snapshot() {
    const Timestamp ts = next_snapshot_;
    next_snapshot_ += kNanosPerSecond;
    auto snap = book_.snapshot(cfg_.book_depth, ts);
    if (auto m2 = book_.mid_price_x2()) {
      mid_x2_history_.push_back(*m2);
      if (static_cast<int>(mid_x2_history_.size()) > cfg_.history_length) mid_x2_history_.erase(mid_x2_history_.begin());
    }
    history_.push_back(snap);
    if (static_cast<int>(history_.size()) > cfg_.history_length) history_.pop_front();
    log_.fundamental.push_back({ts, fundamental_.at(ts)});
    if (hooks_.on_snapshot) hooks_.on_snapshot(snap);
    log_.snapshots.push_back(std::move(snap));
  }

  MarketConfig cfg_;
  std::uint64_t seed_;
  KernelHooks hooks_;
  OrderBook book_;
  FundamentalPath fundamental_;
  std::vector<std::unique_ptr<Agent>> agents_;
  std::vector<Rng> rngs_;
  std::vector<OracleObserver> observers_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::unordered_map<AgentId, std::vector<OrderId>> own_orders_;
  std::vector<VolumeMark> volume_marks_;
  std::vector<Price> mid_x2_history_;
  std::deque<lob::BookSnapshot> history_;
  SessionLog log_;
  std::optional<Price> last_trade_;
  Timestamp now_{0};
  Timestamp next_snapshot_{kNanosPerSecond};
  std::uint64_t next_event_seq_{0};
  OrderId next_order_id_{1};
  bool stopped_{false};
};

// Runs a whole session.
inline SessionLog kernel_run(const MarketConfig& cfg, std::uint64_t seed, KernelHooks hooks = {}) {
  MarketSimulation sim(cfg, seed, std::move(hooks));
  sim.run_to_end();
  return sim.take_log();
}

}  // namespace execsim::market
