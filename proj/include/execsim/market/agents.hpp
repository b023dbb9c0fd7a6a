#pragma once

#include <execsim/lob/types.hpp>
#include <execsim/market/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace execsim::market {

using lob::AgentId;
using lob::BookSnapshot;
using lob::Price;
using lob::Qty;
using lob::Side;
using lob::Timestamp;
using lob::kNanosPerSecond;

// ---------------------------------------------------------------------------
// Per-class parameters. Values that the reference configuration does not pin
// down (noise wake rate, sizes, momentum windows) are defaults only.

struct NoiseAgentParams {
  double wake_mean_seconds{60.0};
  Qty min_size{10};
  Qty max_size{100};
};

struct ValueAgentParams {
  double mu{100000.0};        // cents
  double theta{1.67e-15};     // per ns
  double lambda{5.7e-12};     // arrivals per ns
  Qty size{100};
  double obs_noise_var{100.0};  // cents^2
};

struct MomentumAgentParams {
  int short_window{20};
  int long_window{50};
  Qty size{50};
  double wake_mean_seconds{30.0};
};

struct MarketMakerParams {
  double pov{0.00025};
  int n_ticks{10};
  Timestamp wake_interval{kNanosPerSecond};
  // Volume lookback grows with elapsed session time up to this cap.
  Timestamp window_max{1800 * kNanosPerSecond};
  Qty min_size{1};
};

// ---------------------------------------------------------------------------
// Actions emitted on wake-up; the kernel applies them through the book.

struct PlaceLimit {
  Side side;
  Price price;
  Qty qty;
};
struct PlaceMarket {
  Side side;
  Qty qty;
};
struct CancelAllOwn {};

using AgentAction = std::variant<PlaceLimit, PlaceMarket, CancelAllOwn>;

struct AgentActions {
  std::vector<AgentAction> actions;
  std::optional<Timestamp> next_wakeup_delay;  // none = do not reschedule
};

// Read-only market view handed to an agent on wake-up.
struct WakeContext {
  Timestamp now{0};
  Timestamp session_end{0};
  const BookSnapshot* snapshot{nullptr};
  // Twice-mid values of recent one-second snapshots, oldest first, one-sided seconds skipped.
  std::span<const Price> mid_x2_history;
  std::optional<Price> last_trade;
  std::function<Qty(Timestamp)> window_volume;       // volume traded over (now - w, now]
  std::function<double()> observe_fundamental;      // noisy oracle value for this agent
};

inline Timestamp exponential_delay(double mean_seconds, Rng& rng) {
  const double s = std::exponential_distribution<double>(1.0 / mean_seconds)(rng);
  return std::max<Timestamp>(1, static_cast<Timestamp>(std::llround(s * static_cast<double>(kNanosPerSecond))));
}

inline Price round_to_tick(double cents) { return std::max<Price>(1, static_cast<Price>(std::llround(cents))); }

class Agent {
 public:
  explicit Agent(AgentId id) : id_(id) {}
  virtual ~Agent() = default;
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  [[nodiscard]] AgentId id() const noexcept { return id_; }
  [[nodiscard]] virtual const char* kind() const noexcept = 0;
  // Delay from session open to the first wake-up.
  virtual Timestamp first_wakeup(Rng& rng) = 0;
  virtual AgentActions wakeup(const WakeContext& ctx, Rng& rng) = 0;

 private:
  AgentId id_;
};

// ---------------------------------------------------------------------------

// Coin-flip side, uniform size, market order; exponential sleep.
class NoiseAgent final : public Agent {
 public:
  NoiseAgent(AgentId id, NoiseAgentParams p) : Agent(id), p_(p) {
    if (p.min_size < 1 || p.max_size < p.min_size || !(p.wake_mean_seconds > 0.0)) {
      throw std::invalid_argument("noise agent: bad parameters");
    }
  }
  const char* kind() const noexcept override { return "noise"; }
  Timestamp first_wakeup(Rng& rng) override { return exponential_delay(p_.wake_mean_seconds, rng); }

  AgentActions wakeup(const WakeContext&, Rng& rng) override {
    AgentActions out;
    const Side side = std::bernoulli_distribution(0.5)(rng) ? Side::Bid : Side::Ask;
    const Qty qty = std::uniform_int_distribution<Qty>(p_.min_size, p_.max_size)(rng);
    out.actions.emplace_back(PlaceMarket{side, qty});
    out.next_wakeup_delay = exponential_delay(p_.wake_mean_seconds, rng);
    return out;
  }

 private:
  NoiseAgentParams p_;
};

// Trades toward its projected fundamental estimate.
class ValueAgent final : public Agent {
 public:
  ValueAgent(AgentId id, ValueAgentParams p) : Agent(id), p_(p) {
    if (!(p.lambda > 0.0) || p.size < 1 || !(p.theta >= 0.0)) throw std::invalid_argument("value agent: bad parameters");
  }
  const char* kind() const noexcept override { return "value"; }
  Timestamp first_wakeup(Rng& rng) override { return arrival_delay(rng); }

  // Mean-reverting projection of an observation to the session close.
  [[nodiscard]] double estimate(double obs, Timestamp now, Timestamp session_end) const {
    const double horizon = static_cast<double>(std::max<Timestamp>(0, session_end - now));
    return p_.mu + (obs - p_.mu) * std::exp(-p_.theta * horizon);
  }

  // Order placement rule given a fair-value estimate.
  [[nodiscard]] std::optional<PlaceLimit> decide(const BookSnapshot& snap, double est, Rng& rng) const {
    const auto bid = snap.best_bid();
    const auto ask = snap.best_ask();
    if (ask && est > static_cast<double>(*ask)) return PlaceLimit{Side::Bid, *ask, p_.size};
    if (bid && est < static_cast<double>(*bid)) return PlaceLimit{Side::Ask, *bid, p_.size};
    if (bid && ask) {
      const double mid = 0.5 * static_cast<double>(*bid + *ask);
      if (est > mid) return PlaceLimit{Side::Bid, *bid + 1 < *ask ? *bid + 1 : *bid, p_.size};
      if (est < mid) return PlaceLimit{Side::Ask, *ask - 1 > *bid ? *ask - 1 : *ask, p_.size};
      return std::nullopt;
    }
    // One or both sides empty: quote at the estimate.
    const Price px = round_to_tick(est);
    if (bid) return PlaceLimit{Side::Ask, std::max(px, *bid + 1), p_.size};
    if (ask) return PlaceLimit{Side::Bid, std::min(px, *ask - 1), p_.size};
    const Side side = std::bernoulli_distribution(0.5)(rng) ? Side::Bid : Side::Ask;
    return PlaceLimit{side, px, p_.size};
  }

  AgentActions wakeup(const WakeContext& ctx, Rng& rng) override {
    AgentActions out;
    const double est = estimate(ctx.observe_fundamental(), ctx.now, ctx.session_end);
    if (auto order = decide(*ctx.snapshot, est, rng); order && order->price > 0) out.actions.emplace_back(*order);
    out.next_wakeup_delay = arrival_delay(rng);
    return out;
  }

 private:
  Timestamp arrival_delay(Rng& rng) const {
    const double ns = std::exponential_distribution<double>(p_.lambda)(rng);
    return std::max<Timestamp>(1, static_cast<Timestamp>(std::llround(ns)));
  }

  ValueAgentParams p_;
};

struct MovingAverages {
  // Exact sums of twice-mid values; MAs are sum / (2 * window).
  std::int64_t short_sum_x2{0};
  std::int64_t long_sum_x2{0};
  int short_window{0};
  int long_window{0};

  [[nodiscard]] double short_ma() const { return static_cast<double>(short_sum_x2) / (2.0 * short_window); }
  [[nodiscard]] double long_ma() const { return static_cast<double>(long_sum_x2) / (2.0 * long_window); }
  // Sign of short_ma - long_ma, computed in integers.
  [[nodiscard]] int trend() const {
    const auto lhs = static_cast<__int128>(short_sum_x2) * long_window;
    const auto rhs = static_cast<__int128>(long_sum_x2) * short_window;
    return lhs > rhs ? 1 : (lhs < rhs ? -1 : 0);
  }
};

inline std::optional<MovingAverages> moving_averages(std::span<const Price> mid_x2, int short_window, int long_window) {
  if (static_cast<int>(mid_x2.size()) < long_window) return std::nullopt;
  MovingAverages m{0, 0, short_window, long_window};
  const auto n = mid_x2.size();
  for (std::size_t i = n - static_cast<std::size_t>(long_window); i < n; ++i) {
    m.long_sum_x2 += mid_x2[i];
    if (i >= n - static_cast<std::size_t>(short_window)) m.short_sum_x2 += mid_x2[i];
  }
  return m;
}

// Trend follower on short/long moving averages of the mid.
class MomentumAgent final : public Agent {
 public:
  MomentumAgent(AgentId id, MomentumAgentParams p) : Agent(id), p_(p) {
    if (p.short_window < 1 || p.long_window <= p.short_window || p.size < 1 || !(p.wake_mean_seconds > 0.0)) {
      throw std::invalid_argument("momentum agent: bad parameters");
    }
  }
  const char* kind() const noexcept override { return "momentum"; }
  Timestamp first_wakeup(Rng& rng) override { return exponential_delay(p_.wake_mean_seconds, rng); }

  [[nodiscard]] std::optional<PlaceMarket> decide(std::span<const Price> mid_x2) const {
    const auto ma = moving_averages(mid_x2, p_.short_window, p_.long_window);
    if (!ma) return std::nullopt;
    const int trend = ma->trend();
    if (trend > 0) return PlaceMarket{Side::Bid, p_.size};
    if (trend < 0) return PlaceMarket{Side::Ask, p_.size};
    return std::nullopt;
  }

  AgentActions wakeup(const WakeContext& ctx, Rng& rng) override {
    AgentActions out;
    if (auto order = decide(ctx.mid_x2_history)) out.actions.emplace_back(*order);
    out.next_wakeup_delay = exponential_delay(p_.wake_mean_seconds, rng);
    return out;
  }

 private:
  MomentumAgentParams p_;
};

// Cancel-replace ladder of n_ticks levels per side around a reference price,
// sized as a fraction of recently traded volume.
class MarketMaker final : public Agent {
 public:
  MarketMaker(AgentId id, MarketMakerParams p) : Agent(id), p_(p) {
    if (!(p.pov > 0.0 && p.pov < 1.0) || p.n_ticks < 1 || p.wake_interval <= 0 || p.window_max <= 0 ||
        p.min_size < 1) {
      throw std::invalid_argument("market maker: bad parameters");
    }
  }
  const char* kind() const noexcept override { return "market_maker"; }
  Timestamp first_wakeup(Rng&) override { return 0; }

  [[nodiscard]] Qty level_size(Qty window_volume) const {
    return std::max<Qty>(p_.min_size, std::llround(p_.pov * static_cast<double>(window_volume)));
  }

  [[nodiscard]] Timestamp window_length(Timestamp now) const {
    return std::clamp<Timestamp>(now, kNanosPerSecond, p_.window_max);
  }

  // Ladder around a reference expressed as twice the price, so half-tick mids are exact.
  [[nodiscard]] std::vector<PlaceLimit> ladder(Price ref_x2, Qty size) const {
    const Price lo = ref_x2 / 2;             // floor for positive prices
    const Price hi = (ref_x2 + 1) / 2;       // ceil
    std::vector<PlaceLimit> out;
    out.reserve(2 * static_cast<std::size_t>(p_.n_ticks));
    for (int j = 1; j <= p_.n_ticks; ++j) {
      if (hi - j > 0) out.push_back({Side::Bid, hi - j, size});
      out.push_back({Side::Ask, lo + j, size});
    }
    return out;
  }

  AgentActions wakeup(const WakeContext& ctx, Rng&) override {
    AgentActions out;
    out.next_wakeup_delay = p_.wake_interval;
    out.actions.emplace_back(CancelAllOwn{});
    Price ref_x2 = 0;
    if (ctx.snapshot->best_bid() && ctx.snapshot->best_ask()) {
      ref_x2 = *ctx.snapshot->best_bid() + *ctx.snapshot->best_ask();
    } else if (ctx.last_trade) {
      ref_x2 = 2 * *ctx.last_trade;
    } else {
      ref_x2 = 2 * round_to_tick(ctx.observe_fundamental());
    }
    const Qty size = level_size(ctx.window_volume(window_length(ctx.now)));
    for (const auto& o : ladder(ref_x2, size)) out.actions.emplace_back(o);
    return out;
  }

  [[nodiscard]] const MarketMakerParams& params() const noexcept { return p_; }

 private:
  MarketMakerParams p_;
};

}  // namespace execsim::market
