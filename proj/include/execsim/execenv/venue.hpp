#pragma once

#include <execsim/lob/order_book.hpp>
#include <execsim/market/kernel.hpp>
#include <execsim/util/errors.hpp>

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <variant>

namespace execsim::execenv {

using lob::Price;
using lob::Qty;
using lob::Side;
using lob::Timestamp;
using lob::kNanosPerSecond;

inline Timestamp seconds_to_ns(double s) { return static_cast<Timestamp>(std::llround(s * static_cast<double>(kNanosPerSecond))); }

// Where the execution agent's market orders go.
class Venue {
 public:
  virtual ~Venue() = default;
  // Fresh session for this seed, positioned at the execution start.
  virtual void reset(std::uint64_t seed) = 0;
  [[nodiscard]] virtual const lob::OrderBook& book() const = 0;
  virtual lob::MarketResult execute(Side side, Qty qty) = 0;
  virtual void advance(Timestamp dt) = 0;
  // Arrival-price fallback when the book has no mid.
  virtual double reference_price() = 0;
  [[nodiscard]] virtual Timestamp now() const = 0;
  // Session time left after now.
  [[nodiscard]] virtual Timestamp time_available() const = 0;
};

// ---------------------------------------------------------------------------

struct SimulatedMarketConfig {
  market::MarketConfig market;
  double warmup_s{1800.0};
};

// Live agent-based session; execution starts after a warm-up period.
class SimulatedMarket final : public Venue {
 public:
  explicit SimulatedMarket(SimulatedMarketConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.market.validate();
    if (!(cfg_.warmup_s >= 0.0)) throw ConfigError("venue: warmup must be >= 0");
    if (seconds_to_ns(cfg_.warmup_s) > cfg_.market.session_length)
      throw ConfigError("venue: warmup exceeds the session length");
  }

  void reset(std::uint64_t seed) override {
    sim_.emplace(cfg_.market, seed);
    sim_->advance_to(seconds_to_ns(cfg_.warmup_s));
  }
  const lob::OrderBook& book() const override { return live().book(); }
  lob::MarketResult execute(Side side, Qty qty) override { return live().submit_market(side, qty); }
  void advance(Timestamp dt) override { live().advance_to(live().now() + dt); }
  double reference_price() override { return live().reference_price(); }
  Timestamp now() const override { return live().now(); }
  Timestamp time_available() const override { return live().session_end() - live().now(); }

  [[nodiscard]] market::MarketSimulation& sim() { return live(); }
  [[nodiscard]] const SimulatedMarketConfig& config() const noexcept { return cfg_; }

 private:
  market::MarketSimulation& live() {
    if (!sim_) throw std::logic_error("venue: reset() not called");
    return *sim_;
  }
  const market::MarketSimulation& live() const {
    if (!sim_) throw std::logic_error("venue: reset() not called");
    return *sim_;
  }

  SimulatedMarketConfig cfg_;
  std::optional<market::MarketSimulation> sim_;
};

// ---------------------------------------------------------------------------

struct ConstantBookConfig {
  Price best_bid{99999};
  Price best_ask{100001};
  int n_levels{10};
  Qty level_qty{1000};
  double session_s{86400.0};
};

// Fixed ladder around a constant mid, rebuilt in full after every advance.
// A very large level_qty gives a book with effectively infinite depth at the touch.
class ConstantBookMarket final : public Venue {
 public:
  explicit ConstantBookMarket(ConstantBookConfig cfg) : cfg_(cfg), book_(std::max(10, cfg.n_levels)) {
    if (cfg.best_bid < 1 || cfg.best_ask <= cfg.best_bid || cfg.n_levels < 1 || cfg.level_qty < 1 ||
        cfg.best_bid - cfg.n_levels + 1 < 1 || !(cfg.session_s > 0.0)) {
      throw ConfigError("constant book: invalid ladder");
    }
  }

  void reset(std::uint64_t) override {
    now_ = 0;
    refill();
  }
  const lob::OrderBook& book() const override { return book_; }
  lob::MarketResult execute(Side side, Qty qty) override {
    return book_.submit_market(side, qty, market::kExternalAgentId, now_, next_id_++);
  }
  void advance(Timestamp dt) override {
    now_ += dt;
    refill();
  }
  double reference_price() override { return 0.5 * static_cast<double>(cfg_.best_bid + cfg_.best_ask); }
  Timestamp now() const override { return now_; }
  Timestamp time_available() const override { return seconds_to_ns(cfg_.session_s) - now_; }

 private:
  void refill() {
    book_ = lob::OrderBook(std::max(10, cfg_.n_levels));
    next_id_ = 1;
    for (int j = 0; j < cfg_.n_levels; ++j) {
      book_.submit_limit(lob::Order{next_id_++, 1, Side::Bid, lob::OrderKind::Limit, cfg_.best_bid - j, cfg_.level_qty, now_, 0});
      book_.submit_limit(lob::Order{next_id_++, 1, Side::Ask, lob::OrderKind::Limit, cfg_.best_ask + j, cfg_.level_qty, now_, 0});
    }
  }

  ConstantBookConfig cfg_;
  lob::OrderBook book_;
  Timestamp now_{0};
  lob::OrderId next_id_{1};
};

using VenueConfig = std::variant<SimulatedMarketConfig, ConstantBookConfig>;

inline std::unique_ptr<Venue> make_venue(const VenueConfig& cfg) {
  return std::visit(
      [](const auto& c) -> std::unique_ptr<Venue> {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, SimulatedMarketConfig>) {
          return std::make_unique<SimulatedMarket>(c);
        } else {
          return std::make_unique<ConstantBookMarket>(c);
        }
      },
      cfg);
}

}  // namespace execsim::execenv
