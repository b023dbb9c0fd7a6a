#pragma once

#include <execsim/lob/types.hpp>

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <list>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace execsim::lob {

// How the depth consumed by a market order is measured.
enum class DepthMode : std::uint8_t {
  Levels,  // distinct price levels that produced fills, minus one
  Ticks,   // ticks between first and last fill price
};

struct LimitResult {
  bool accepted{true};
  std::vector<Fill> fills;
  Qty resting_qty{0};
};

struct MarketResult {
  std::vector<Fill> fills;
  Qty filled{0};
  Qty unfilled{0};
  // Sum of price * qty over fills, in tick-shares; exact.
  std::int64_t notional{0};
  int depth_consumed{0};

  [[nodiscard]] Ratio avg_price_ratio() const noexcept {
    return filled == 0 ? Ratio{0, 1} : Ratio{notional, filled};
  }
  [[nodiscard]] std::optional<double> avg_price() const noexcept {
    if (filled == 0) return std::nullopt;
    return static_cast<double>(notional) / static_cast<double>(filled);
  }
};

struct BookLevel {
  Price price{0};
  Qty total_qty{0};
  std::list<Order> queue;  // seq ascending
};

// Price-time priority limit order book.
//
// Single-threaded. All quantities and prices are integers; fractional features
// (mid, average price, imbalance) are exposed as Ratio or as exact doubles.
class OrderBook {
 public:
  explicit OrderBook(int max_depth = 10, DepthMode depth_mode = DepthMode::Levels)
      : max_depth_(max_depth), depth_mode_(depth_mode) {
    if (max_depth < 1) throw std::invalid_argument("OrderBook: max_depth must be >= 1");
  }

  // Writes one CSV row per submit/cancel/fill when set. Header is the caller's job.
  void set_event_log(std::ostream* out) noexcept { event_log_ = out; }
  static constexpr const char* kEventLogHeader = "ts,kind,side,price,qty,order_id,agent_id";

  [[nodiscard]] int max_depth() const noexcept { return max_depth_; }
  [[nodiscard]] DepthMode depth_mode() const noexcept { return depth_mode_; }

  LimitResult submit_limit(Order order) {
    if (order.qty <= 0) throw std::invalid_argument("submit_limit: qty must be > 0");
    if (order.price <= 0) throw std::invalid_argument("submit_limit: price must be > 0");
    order.kind = OrderKind::Limit;
    if (!seen_ids_.insert(order.id).second) return LimitResult{false, {}, 0};
    order.seq = ++seq_;
    log_event(order.ts, "LIMIT", order.side, order.price, order.qty, order.id, order.agent_id);

    LimitResult result;
    Qty remaining = order.qty;
    if (order.side == Side::Bid) {
      remaining = sweep(asks_, order, remaining, order.price, result.fills);
    } else {
      remaining = sweep(bids_, order, remaining, order.price, result.fills);
    }
    if (remaining > 0) {
      order.qty = remaining;
      rest(order);
    }
    result.resting_qty = remaining;
    return result;
  }

  // Market orders never rest; whatever the opposite ladder cannot absorb is reported unfilled.
  MarketResult submit_market(Side side, Qty qty, AgentId agent_id, Timestamp ts, OrderId taker_id = 0) {
    if (qty <= 0) throw std::invalid_argument("submit_market: qty must be > 0");
    if (taker_id != 0 && !seen_ids_.insert(taker_id).second) {
      throw std::invalid_argument("submit_market: duplicate order id");
    }
    Order order{taker_id, agent_id, side, OrderKind::Market, 0, qty, ts, ++seq_};
    log_event(ts, "MARKET", side, 0, qty, taker_id, agent_id);

    MarketResult result;
    Qty remaining = side == Side::Bid ? sweep(asks_, order, qty, std::nullopt, result.fills)
                                      : sweep(bids_, order, qty, std::nullopt, result.fills);
    result.unfilled = remaining;
    result.filled = qty - remaining;
    int levels = 0;
    Price prev = 0;
    for (const auto& f : result.fills) {
      result.notional += f.price * f.qty;
      if (levels == 0 || f.price != prev) ++levels;
      prev = f.price;
    }
    if (!result.fills.empty()) {
      result.depth_consumed = depth_mode_ == DepthMode::Levels
                                  ? levels - 1
                                  : static_cast<int>(std::abs(result.fills.back().price - result.fills.front().price));
    }
    return result;
  }

  bool cancel(OrderId id, Timestamp ts = 0) {
    auto it = index_.find(id);
    if (it == index_.end()) return false;
    const Locator loc = it->second;
    index_.erase(it);
    const Order o = *loc.it;
    if (o.side == Side::Bid) {
      erase_from(bids_, loc);
    } else {
      erase_from(asks_, loc);
    }
    log_event(ts, "CANCEL", o.side, o.price, o.qty, o.id, o.agent_id);
    return true;
  }

  [[nodiscard]] bool is_resting(OrderId id) const { return index_.contains(id); }
  [[nodiscard]] std::optional<Order> find(OrderId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return *it->second.it;
  }
  [[nodiscard]] std::size_t resting_count() const noexcept { return index_.size(); }

  [[nodiscard]] std::optional<Price> best_bid() const {
    return bids_.empty() ? std::nullopt : std::optional<Price>(bids_.begin()->first);
  }
  [[nodiscard]] std::optional<Price> best_ask() const {
    return asks_.empty() ? std::nullopt : std::optional<Price>(asks_.begin()->first);
  }
  // Twice the mid price, exact in ticks.
  [[nodiscard]] std::optional<Price> mid_price_x2() const {
    if (bids_.empty() || asks_.empty()) return std::nullopt;
    return bids_.begin()->first + asks_.begin()->first;
  }
  [[nodiscard]] std::optional<double> mid_price() const {
    auto m2 = mid_price_x2();
    if (!m2) return std::nullopt;
    return 0.5 * static_cast<double>(*m2);
  }
  [[nodiscard]] std::optional<Price> spread() const {
    if (bids_.empty() || asks_.empty()) return std::nullopt;
    return asks_.begin()->first - bids_.begin()->first;
  }

  [[nodiscard]] Qty total_depth(Side side, int k) const {
    check_k(k);
    return side == Side::Bid ? depth_of(bids_, k) : depth_of(asks_, k);
  }

  [[nodiscard]] Ratio volume_imbalance_ratio(Side side, int k) const {
    check_k(k);
    return imbalance_ratio(total_depth(side, k), total_depth(opposite(side), k));
  }
  [[nodiscard]] double volume_imbalance(Side side, int k) const { return volume_imbalance_ratio(side, k).value(); }

  [[nodiscard]] BookSnapshot snapshot(int d, Timestamp ts = 0) const {
    if (d < 1) throw std::invalid_argument("snapshot: d must be >= 1");
    BookSnapshot s;
    s.ts = ts;
    levels_of(bids_, d, s.bids);
    levels_of(asks_, d, s.asks);
    return s;
  }
  [[nodiscard]] BookSnapshot snapshot() const { return snapshot(max_depth_); }

  // Total resting quantity on one side, all levels.
  [[nodiscard]] Qty side_volume(Side side) const {
    Qty sum = 0;
    if (side == Side::Bid) {
      for (const auto& [p, lvl] : bids_) sum += lvl.total_qty;
    } else {
      for (const auto& [p, lvl] : asks_) sum += lvl.total_qty;
    }
    return sum;
  }

  // Read-only walk over resting orders on a side, best level first, FIFO within level.
  template <class F>
  void for_each_resting(Side side, F&& fn) const {
    auto walk = [&](const auto& ladder) {
      for (const auto& [p, lvl] : ladder)
        for (const auto& o : lvl.queue) fn(o);
    };
    if (side == Side::Bid) {
      walk(bids_);
    } else {
      walk(asks_);
    }
  }

 private:
  struct Locator {
    Side side;
    Price price;
    std::list<Order>::iterator it;
  };
  using BidLadder = std::map<Price, BookLevel, std::greater<>>;
  using AskLadder = std::map<Price, BookLevel, std::less<>>;

  void check_k(int k) const {
    if (k < 1 || k > max_depth_) throw std::out_of_range("k must lie in [1, max_depth]");
  }

  template <class Ladder>
  static Qty depth_of(const Ladder& ladder, int k) {
    Qty sum = 0;
    int j = 0;
    for (auto it = ladder.begin(); it != ladder.end() && j < k; ++it, ++j) sum += it->second.total_qty;
    return sum;
  }

  template <class Ladder>
  static void levels_of(const Ladder& ladder, int d, std::vector<LevelView>& out) {
    int j = 0;
    for (auto it = ladder.begin(); it != ladder.end() && j < d; ++it, ++j) out.push_back({it->first, it->second.total_qty});
  }

  // Matches against the ladder best-first until qty is exhausted or the limit stops crossing.
  template <class Ladder>
  Qty sweep(Ladder& ladder, const Order& taker, Qty qty, std::optional<Price> limit, std::vector<Fill>& fills) {
    while (qty > 0 && !ladder.empty()) {
      auto lvl_it = ladder.begin();
      const Price px = lvl_it->first;
      if (limit) {
        const bool crosses = taker.side == Side::Bid ? px <= *limit : px >= *limit;
        if (!crosses) break;
      }
      BookLevel& lvl = lvl_it->second;
      while (qty > 0 && !lvl.queue.empty()) {
        Order& maker = lvl.queue.front();
        const Qty q = std::min(qty, maker.qty);
        fills.push_back(Fill{taker.id, maker.id, taker.agent_id, maker.agent_id, taker.side, px, q, taker.ts});
        log_event(taker.ts, "FILL", taker.side, px, q, maker.id, maker.agent_id);
        qty -= q;
        maker.qty -= q;
        lvl.total_qty -= q;
        if (maker.qty == 0) {
          index_.erase(maker.id);
          lvl.queue.pop_front();
        }
      }
      if (lvl.queue.empty()) ladder.erase(lvl_it);
    }
    return qty;
  }

  void rest(const Order& order) {
    auto place = [&](auto& ladder) {
      auto [it, inserted] = ladder.try_emplace(order.price);
      BookLevel& lvl = it->second;
      if (inserted) lvl.price = order.price;
      lvl.queue.push_back(order);
      lvl.total_qty += order.qty;
      index_[order.id] = Locator{order.side, order.price, std::prev(lvl.queue.end())};
    };
    if (order.side == Side::Bid) {
      place(bids_);
    } else {
      place(asks_);
    }
  }

  template <class Ladder>
  static void erase_from(Ladder& ladder, const Locator& loc) {
    auto lvl_it = ladder.find(loc.price);
    BookLevel& lvl = lvl_it->second;
    lvl.total_qty -= loc.it->qty;
    lvl.queue.erase(loc.it);
    if (lvl.queue.empty()) ladder.erase(lvl_it);
  }

  void log_event(Timestamp ts, const char* kind, Side side, Price price, Qty qty, OrderId id, AgentId agent) {
    if (event_log_ == nullptr) return;
    *event_log_ << ts << ',' << kind << ',' << to_string(side) << ',' << price << ',' << qty << ',' << id << ','
                << agent << '\n';
  }

  int max_depth_;
  DepthMode depth_mode_;
  BidLadder bids_;
  AskLadder asks_;
  std::unordered_map<OrderId, Locator> index_;
  std::unordered_set<OrderId> seen_ids_;
  SeqNo seq_{0};
  std::ostream* event_log_{nullptr};
};

}  // namespace execsim::lob
