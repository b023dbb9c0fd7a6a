#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

namespace execsim::lob {

// Prices are integer ticks; one tick is one cent.
using Price = std::int64_t;
using Qty = std::int64_t;
using OrderId = std::uint64_t;
using AgentId = std::int64_t;
using SeqNo = std::uint64_t;
// Simulation time in nanoseconds since session open.
using Timestamp = std::int64_t;

inline constexpr Timestamp kNanosPerSecond = 1'000'000'000;

enum class Side : std::uint8_t { Bid, Ask };
enum class OrderKind : std::uint8_t { Limit, Market };

constexpr Side opposite(Side s) noexcept { return s == Side::Bid ? Side::Ask : Side::Bid; }

constexpr std::string_view to_string(Side s) noexcept { return s == Side::Bid ? "BID" : "ASK"; }

struct Order {
  OrderId id{0};
  AgentId agent_id{0};
  Side side{Side::Bid};
  OrderKind kind{OrderKind::Limit};
  Price price{0};  // unused for market orders
  Qty qty{0};
  Timestamp ts{0};
  SeqNo seq{0};  // assigned by the book on submission
};

struct Fill {
  OrderId taker_order_id{0};
  OrderId maker_order_id{0};
  AgentId taker_agent_id{0};
  AgentId maker_agent_id{0};
  Side taker_side{Side::Bid};
  Price price{0};
  Qty qty{0};
  Timestamp ts{0};

  friend bool operator==(const Fill&, const Fill&) = default;
};

// Exact non-negative fraction; used where a feature can be fractional.
struct Ratio {
  std::int64_t num{0};
  std::int64_t den{1};

  [[nodiscard]] double value() const noexcept {
    return static_cast<double>(num) / static_cast<double>(den);
  }
  [[nodiscard]] Ratio reduced() const noexcept {
    const auto g = std::gcd(num, den);
    return g == 0 ? Ratio{0, 1} : Ratio{num / g, den / g};
  }
  friend bool operator==(const Ratio& a, const Ratio& b) noexcept {
    return static_cast<__int128>(a.num) * b.den == static_cast<__int128>(b.num) * a.den;
  }
};

struct LevelView {
  Price price{0};
  Qty qty{0};
  friend bool operator==(const LevelView&, const LevelView&) = default;
};

// Top-of-book view. bids best-first (descending), asks best-first (ascending).
struct BookSnapshot {
  Timestamp ts{0};
  std::vector<LevelView> bids;
  std::vector<LevelView> asks;

  [[nodiscard]] const std::vector<LevelView>& side(Side s) const noexcept {
    return s == Side::Bid ? bids : asks;
  }
  [[nodiscard]] std::optional<Price> best_bid() const {
    return bids.empty() ? std::nullopt : std::optional<Price>(bids.front().price);
  }
  [[nodiscard]] std::optional<Price> best_ask() const {
    return asks.empty() ? std::nullopt : std::optional<Price>(asks.front().price);
  }
  [[nodiscard]] std::optional<double> mid_price() const {
    if (bids.empty() || asks.empty()) return std::nullopt;
    return 0.5 * static_cast<double>(bids.front().price + asks.front().price);
  }
  [[nodiscard]] std::optional<Price> spread() const {
    if (bids.empty() || asks.empty()) return std::nullopt;
    return asks.front().price - bids.front().price;
  }

  friend bool operator==(const BookSnapshot&, const BookSnapshot&) = default;
};

// TD_h^k over a snapshot; levels beyond the snapshot contribute 0.
inline Qty total_depth(const BookSnapshot& snap, Side side, int k) {
  if (k < 1) throw std::out_of_range("total_depth: k must be >= 1");
  Qty sum = 0;
  const auto& levels = snap.side(side);
  for (std::size_t j = 0; j < levels.size() && j < static_cast<std::size_t>(k); ++j) sum += levels[j].qty;
  return sum;
}

// v_h^k = TD_h^k / (TD_bid^k + TD_ask^k); 1/2 when both sides are empty.
inline Ratio imbalance_ratio(Qty td_side, Qty td_other) noexcept {
  const Qty total = td_side + td_other;
  if (total == 0) return Ratio{1, 2};
  return Ratio{td_side, total};
}

inline Ratio volume_imbalance_ratio(const BookSnapshot& snap, Side side, int k) {
  return imbalance_ratio(total_depth(snap, side, k), total_depth(snap, opposite(side), k));
}

inline double volume_imbalance(const BookSnapshot& snap, Side side, int k) {
  return volume_imbalance_ratio(snap, side, k).value();
}

}  // namespace execsim::lob
