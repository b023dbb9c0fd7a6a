#include <gtest/gtest.h>

#include <execsim/execenv/exec_env.hpp>
#include <support/scripted_venue.hpp>

#include <cmath>
#include <random>
#include <sstream>

using namespace execsim;
using namespace execsim::execenv;
using execsim::testing::ScriptedVenue;

namespace {

constexpr Timestamp kSec = kNanosPerSecond;

ExecConfig small_exec(Qty x0, double window_s) {
  ExecConfig c;
  c.parent_size = x0;
  c.time_window_s = window_s;
  return c;
}

std::pair<ExecEnv, ScriptedVenue*> scripted(ExecConfig cfg, std::function<void(ScriptedVenue&)> on_reset) {
  auto v = std::make_unique<ScriptedVenue>();
  v->on_reset = std::move(on_reset);
  ScriptedVenue* raw = v.get();
  return {ExecEnv(cfg, std::move(v)), raw};
}

void quote(ScriptedVenue& v, Price bid, Price ask, Qty qty = 100) {
  v.add(Side::Bid, bid, qty);
  v.add(Side::Ask, ask, qty);
}

EnvSpec lite_spec(Qty x0 = 2000, double window_s = 300, double warmup_s = 300) {
  SimulatedMarketConfig m;
  m.market.population = {100, 10, 2, 1};
  m.market.session_length = seconds_to_ns(warmup_s + window_s);
  m.warmup_s = warmup_s;
  return EnvSpec{small_exec(x0, window_s), m};
}

EnvSpec deep_constant_spec(ExecConfig exec) {
  ConstantBookConfig b;
  b.level_qty = 1'000'000'000'000LL;
  return EnvSpec{exec, b};
}

}  // namespace

TEST(ExecEnvTest, ResetStartsFullAndStacksInitialFrame) {
  auto env = make_env(lite_spec());
  const auto& obs = env.reset(1);
  ASSERT_EQ(obs.size(), 36u);
  EXPECT_EQ(obs[0], 1.0);
  EXPECT_EQ(obs[1], 1.0);
  for (int h = 1; h < 4; ++h)
    for (int i = 0; i < 9; ++i) EXPECT_EQ(obs[static_cast<std::size_t>(9 * h + i)], obs[static_cast<std::size_t>(i)]);
}

TEST(ExecEnvTest, ArrivalPriceIsMidAtStart) {
  auto spec = lite_spec();
  auto env = make_env(spec);
  env.reset(3);
  auto& sim = dynamic_cast<SimulatedMarket&>(env.venue()).sim();
  ASSERT_TRUE(sim.book().mid_price());
  EXPECT_EQ(env.arrival_price(), *sim.book().mid_price());
  EXPECT_EQ(sim.now(), seconds_to_ns(300));
}

TEST(ExecEnvTest, ArrivalPriceFallsBackWithoutMid) {
  auto [env, v] = scripted(small_exec(100, 10), [](ScriptedVenue& s) { s.add(Side::Bid, 4000, 10); });
  env.reset(0);
  EXPECT_EQ(env.arrival_price(), 5000.0);
}

TEST(ExecEnvTest, SameSeedSameObservations) {
  auto a = make_env(lite_spec());
  auto b = make_env(lite_spec());
  EXPECT_EQ(a.reset(9), b.reset(9));
  for (int k = 0; k < 50; ++k) {
    auto ra = a.step(k % 5);
    auto rb = b.step(k % 5);
    ASSERT_EQ(ra.observation, rb.observation);
    ASSERT_EQ(ra.reward, rb.reward);
  }
  auto c = make_env(lite_spec());
  c.reset(9);
  c.reset(10);
  EXPECT_EQ(c.reset(9), a.reset(9));
}

TEST(ExecEnvTest, RewardSubstitutionExample) {
  // P0 = 10000, buy 20 at 10 x 9998 + 10 x 10000: P_t = 9999, d_t = 1.
  auto [env, v] = scripted(small_exec(100, 10), [](ScriptedVenue& s) { quote(s, 9999, 10001); });
  env.reset(0);
  ASSERT_EQ(env.arrival_price(), 10000.0);
  v->clear();
  v->add(Side::Ask, 9998, 10);
  v->add(Side::Ask, 10000, 10);
  auto r = env.step(1);
  EXPECT_EQ(r.info.filled, 20);
  EXPECT_EQ(*r.info.avg_price, 9999.0);
  EXPECT_EQ(r.info.depth_consumed, 1);
  EXPECT_DOUBLE_EQ(r.reward, 18.0);
  EXPECT_DOUBLE_EQ(r.info.terms.shortfall, 20.0);
  EXPECT_DOUBLE_EQ(r.info.terms.depth, -2.0);
}

TEST(ExecEnvTest, TerminalPenaltyOnLeftoverInventory) {
  auto [env, v] = scripted(small_exec(100, 2), [](ScriptedVenue& s) { quote(s, 9999, 10001); });
  env.reset(0);
  auto r0 = env.step(0);
  EXPECT_EQ(r0.reward, 0.0);
  EXPECT_FALSE(r0.done);
  auto r1 = env.step(0);
  EXPECT_TRUE(r1.done);
  EXPECT_EQ(r1.info.inventory, 100);
  EXPECT_DOUBLE_EQ(r1.info.terms.terminal, -500.0);
  EXPECT_DOUBLE_EQ(r1.reward, -500.0);
  EXPECT_EQ(env.stats().time_fraction(), 1.0);
  EXPECT_THROW(env.step(0), std::logic_error);
}

TEST(ExecEnvTest, UnfilledOrderDoesNotCount) {
  auto [env, v] = scripted(small_exec(100, 10), [](ScriptedVenue& s) { quote(s, 9999, 10001); });
  env.reset(0);
  v->clear();
  v->add(Side::Bid, 9999, 100);
  auto r = env.step(4);
  EXPECT_EQ(r.info.requested, 80);
  EXPECT_EQ(r.info.filled, 0);
  EXPECT_FALSE(r.info.avg_price);
  EXPECT_EQ(r.info.depth_consumed, 0);
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_EQ(r.info.inventory, 100);

  v->add(Side::Ask, 10001, 30);
  auto partial = env.step(4);
  EXPECT_EQ(partial.info.filled, 30);
  EXPECT_EQ(partial.info.inventory, 70);
  EXPECT_DOUBLE_EQ(partial.reward, -30.0);
}

TEST(ExecEnvTest, SymmetricBookGivesHalfImbalances) {
  auto [env, v] = scripted(small_exec(100, 10), [](ScriptedVenue& s) {
    for (int j = 0; j < 6; ++j) quote(s, 9999 - j, 10001 + j, 10 + j);
  });
  const auto& obs = env.reset(0);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(obs[static_cast<std::size_t>(2 + k)], 0.5);
  EXPECT_EQ(obs[7], -0.1);
  EXPECT_EQ(obs[8], 0.1);
}

TEST(ExecEnvTest, ImbalanceUsesParentSide) {
  auto [env, v] = scripted(small_exec(100, 10), [](ScriptedVenue& s) {
    s.add(Side::Bid, 9999, 30);
    s.add(Side::Ask, 10001, 10);
  });
  EXPECT_EQ(env.reset(0)[2], 0.75);
  auto cfg = small_exec(100, 10);
  cfg.direction = Direction::Sell;
  auto [sell, w] = scripted(cfg, [](ScriptedVenue& s) {
    s.add(Side::Bid, 9999, 30);
    s.add(Side::Ask, 10001, 10);
  });
  EXPECT_EQ(sell.reset(0)[2], 0.25);
}

TEST(ExecEnvTest, StackShiftsOneFramePerStep) {
  auto env = make_env(lite_spec());
  auto prev = env.reset(4);
  for (int k = 1; k <= 6; ++k) {
    auto r = env.step(1);
    for (int i = 0; i < 27; ++i) EXPECT_EQ(r.observation[static_cast<std::size_t>(i)], prev[static_cast<std::size_t>(i + 9)]);
    EXPECT_DOUBLE_EQ(r.observation[28], 1.0 - k / 300.0);
    EXPECT_DOUBLE_EQ(r.observation[27], 1.0 - static_cast<double>(env.stats().executed) / 2000.0);
    prev = r.observation;
  }
}

TEST(ExecEnvTest, RawQuotesAndLastKnownReuse) {
  auto cfg = small_exec(100, 10);
  cfg.relative_quotes = false;
  auto [env, v] = scripted(cfg, [](ScriptedVenue& s) { quote(s, 9999, 10001, 20); });
  const auto& obs = env.reset(0);
  EXPECT_EQ(obs[7], 9999.0);
  EXPECT_EQ(obs[8], 10001.0);
  auto r = env.step(1);  // empties the ask side
  ASSERT_FALSE(v->book().best_ask());
  EXPECT_EQ(r.observation[35], 10001.0);
  EXPECT_EQ(r.observation[34], 9999.0);
}

TEST(ExecEnvTest, MarketDataBufferIsBounded) {
  auto env = make_env(lite_spec());
  env.reset(2);
  for (int k = 0; k < 80; ++k) env.step(0);
  EXPECT_EQ(env.market_data().size(), 50u);
  EXPECT_EQ(env.market_data().back().ts, seconds_to_ns(300 + 80));
}

TEST(ExecEnvTest, InfeasibleConfigRejected) {
  ExecConfig c;
  c.parent_size = 20 * 4 * 1800 + 1;
  EXPECT_THROW(make_env(deep_constant_spec(c)), ConfigError);
  c = ExecConfig{};
  c.step_dt_s = 0.7;
  EXPECT_THROW(make_env(deep_constant_spec(c)), ConfigError);
  c = ExecConfig{};
  c.parent_size = 0;
  EXPECT_THROW(make_env(deep_constant_spec(c)), ConfigError);

  auto spec = lite_spec();
  std::get<SimulatedMarketConfig>(spec.venue).market.session_length = seconds_to_ns(400);
  auto env = make_env(spec);
  EXPECT_THROW(env.reset(1), ConfigError);
}

TEST(ExecEnvTest, LargestActionCompletesDefaultOrderIn250Steps) {
  auto env = make_env(deep_constant_spec(ExecConfig{}));
  env.reset(0);
  int steps = 0;
  StepOutcome r;
  do {
    r = env.step(4);
    ++steps;
  } while (!r.done);
  EXPECT_EQ(steps, 250);
  EXPECT_EQ(env.stats().executed, 20000);
  EXPECT_EQ(*env.stats().completion_step, 249);
  EXPECT_DOUBLE_EQ(env.stats().time_fraction(), 250.0 / 1800.0);
}

TEST(ExecEnvTest, OverExecutionIsPenalisedAndEnds) {
  auto [env, v] = scripted(small_exec(100, 10), [](ScriptedVenue& s) { quote(s, 9999, 10000, 1000); });
  env.reset(0);  // P0 = 9999.5
  env.step(4);   // 80
  auto r = env.step(2);  // 40 more, 20 over
  EXPECT_TRUE(r.done);
  EXPECT_EQ(env.stats().executed, 120);
  EXPECT_EQ(env.stats().excess, 20);
  EXPECT_DOUBLE_EQ(r.info.terms.over_exec, -100.0);
  EXPECT_DOUBLE_EQ(r.info.terms.shortfall, -20.0);
  EXPECT_EQ(r.info.inventory, 0);
  EXPECT_EQ(env.stats().executed + r.info.inventory, 100 + env.stats().excess);
}

TEST(ExecEnvTest, ZeroRewardAfterCompletionUntilWindowEnd) {
  auto cfg = small_exec(100, 20);
  cfg.terminate_on_completion = false;
  auto env = make_env(deep_constant_spec(cfg));
  env.reset(0);
  int k = 0;
  StepOutcome r;
  do {
    r = env.step(4);
    if (k >= 2) {
      EXPECT_EQ(r.reward, 0.0) << k;
      EXPECT_EQ(r.info.action, 0);
      EXPECT_EQ(r.info.filled, 0);
    }
    ++k;
  } while (!r.done);
  EXPECT_EQ(k, 20);
  EXPECT_EQ(env.stats().excess, 60);
  EXPECT_EQ(*env.stats().completion_step, 1);
}

TEST(ExecEnvTest, SellMirrorsBuy) {
  auto run = [](Direction d) {
    auto cfg = small_exec(100, 10);
    cfg.direction = d;
    auto [env, v] = scripted(cfg, [](ScriptedVenue& s) {
      s.add(Side::Bid, 99999, 10);
      s.add(Side::Bid, 99997, 30);
      s.add(Side::Ask, 100001, 10);
      s.add(Side::Ask, 100003, 30);
    });
    env.reset(0);
    return env.step(2);
  };
  const auto buy = run(Direction::Buy);
  const auto sell = run(Direction::Sell);
  // Same cost either way; the raw Q (P0 - P_t) term flips sign for the sell.
  EXPECT_DOUBLE_EQ(buy.reward, sell.reward);
  EXPECT_DOUBLE_EQ(buy.info.terms.shortfall, -100.0);  // 10 x +1c and 30 x +3c
  EXPECT_DOUBLE_EQ(40 * (100000.0 - *buy.info.avg_price), -(40 * (100000.0 - *sell.info.avg_price)));
}

TEST(ExecEnvTest, ShortfallExamples) {
  auto [env, v] = scripted(small_exec(20, 10), [](ScriptedVenue& s) { quote(s, 9999, 10001); });
  env.reset(0);
  v->clear();
  v->add(Side::Ask, 9999, 20);
  env.step(1);
  EXPECT_DOUBLE_EQ(env.stats().normalized_is(), 1.0);

  auto [flat, w] = scripted(small_exec(40, 10), [](ScriptedVenue& s) { quote(s, 9999, 10001); });
  flat.reset(0);
  w->clear();
  w->add(Side::Ask, 10000, 40);
  flat.step(1);
  flat.step(1);
  EXPECT_DOUBLE_EQ(flat.stats().normalized_is(), 0.0);
}

TEST(ExecEnvTest, ShortfallMatchesSessionFillLog) {
  auto env = make_env(lite_spec());
  env.reset(12);
  std::mt19937_64 rng(1);
  StepOutcome r;
  do r = env.step(static_cast<int>(rng() % 5));
  while (!r.done);
  auto& sim = dynamic_cast<SimulatedMarket&>(env.venue()).sim();
  double cost = 0.0;
  Qty shares = 0;
  for (const auto& f : sim.log().fills) {
    if (f.taker_agent_id != market::kExternalAgentId) continue;
    cost += static_cast<double>(f.price) * static_cast<double>(f.qty);
    shares += f.qty;
  }
  EXPECT_EQ(shares, env.stats().executed);
  const double is = (static_cast<double>(shares) * env.arrival_price() - cost) / 2000.0;
  EXPECT_NEAR(env.stats().normalized_is(), is, 1e-9);
}

TEST(ExecEnvTest, RandomEpisodesKeepTheRewardContract) {
  auto spec = lite_spec(400, 60, 120);
  auto env = make_env(spec);
  std::mt19937_64 rng(5);
  for (std::uint64_t ep = 0; ep < 30; ++ep) {
    env.reset(ep);
    double sum = 0.0;
    StepOutcome r;
    do {
      r = env.step(static_cast<int>(rng() % 5));
      const auto& t = r.info.terms;
      ASSERT_NEAR(r.reward, t.shortfall + t.depth + t.terminal + t.over_exec, 1e-9);
      ASSERT_EQ(env.stats().executed + r.info.inventory, 400 + env.stats().excess);
      ASSERT_GE(r.info.inventory, 0);
      sum += r.reward;
    } while (!r.done);
    const auto& s = env.stats();
    EXPECT_NEAR(sum, s.total_reward, 1e-6);
    EXPECT_NEAR(s.terms.total(), s.total_reward, 1e-6);
    EXPECT_LE(s.time_fraction(), 1.0);
    EXPECT_NEAR(s.normalized_penalty() * 400, s.terms.depth + s.terms.terminal + s.terms.over_exec, 1e-6);
  }
}

TEST(ExecEnvTest, TraceCsvColumns) {
  auto [env, v] = scripted(small_exec(20, 3), [](ScriptedVenue& s) { quote(s, 9999, 10001); });
  env.reset(0);
  env.step(0);
  env.step(1);
  std::ostringstream os;
  write_trace_csv(os, env.trace(), "h");
  EXPECT_EQ(os.str(),
            "# config_hash=h\n"
            "t,action,filled,avg_price,d_t,reward,inventory,best_bid,best_ask\n"
            "0,0,0,,0,0,20,9999,10001\n"
            "1,1,20,10001,0,-20,0,9999,10001\n");
}
