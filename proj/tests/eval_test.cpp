#include <gtest/gtest.h>

#include <execsim/eval/report.hpp>

#include <cmath>
#include <filesystem>
#include <numeric>

using namespace execsim;
using namespace execsim::eval;
namespace fs = std::filesystem;

namespace {

execenv::EnvSpec lite_spec(double window_s = 120, double warmup_s = 120) {
  execenv::ExecConfig e;
  e.parent_size = 1000;
  e.time_window_s = window_s;
  execenv::SimulatedMarketConfig m;
  m.market.population = {100, 10, 2, 1};
  m.market.session_length = execenv::seconds_to_ns(warmup_s + window_s);
  m.warmup_s = warmup_s;
  return {e, m};
}

EpisodeResult result(std::string policy, double is, double pen, double t) {
  EpisodeResult r;
  r.policy = std::move(policy);
  r.is = is;
  r.pen = pen;
  r.t_frac = t;
  return r;
}

std::shared_ptr<const dqn::QNetwork> random_net(const execenv::ExecConfig& cfg) {
  auto net = std::make_shared<dqn::QNetwork>(std::vector<int>{cfg.obs_dim(), 8, cfg.n_actions()});
  Rng rng(3);
  net->init(rng);
  return net;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("execsim_eval_" + name);
  fs::remove_all(p);
  return p;
}

int data_rows(const fs::path& p) {
  const auto s = read_file(p);
  return static_cast<int>(std::count(s.begin(), s.end(), '\n')) - 2;
}

}  // namespace

TEST(TTestTest, TextbookExample) {
  // means 4 and 2, both variances 1, so t = 2 / sqrt(2/3) = sqrt(6)
  const std::vector<double> a{3, 4, 5}, b{1, 2, 3};
  const auto r = pooled_t_test(a, b);
  EXPECT_NEAR(r.t, std::sqrt(6.0), 1e-9);
  EXPECT_EQ(r.df, 4);
  EXPECT_NEAR(r.critical, 2.131846786, 1e-6);
  EXPECT_TRUE(r.reject);
  EXPECT_FALSE(pooled_t_test(b, a).reject);
}

TEST(TTestTest, IdenticalSamplesGiveZero) {
  const std::vector<double> a{1.5, -2, 7, 0.25};
  const auto r = pooled_t_test(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_FALSE(r.reject);
  const std::vector<double> flat(5, 3.0);
  EXPECT_EQ(pooled_t_test(flat, flat).t, 0.0);
  EXPECT_FALSE(pooled_t_test(flat, flat).reject);
  EXPECT_THROW(pooled_t_test(std::vector<double>{1.0}, a), std::invalid_argument);
}

TEST(TTestTest, CriticalValues) {
  EXPECT_NEAR(student_t_quantile(0.95, 98), 1.660, 1e-3);
  // Reference table values.
  EXPECT_NEAR(student_t_quantile(0.95, 1), 6.313752, 1e-5);
  EXPECT_NEAR(student_t_quantile(0.95, 10), 1.812461, 1e-5);
  EXPECT_NEAR(student_t_quantile(0.95, 30), 1.697261, 1e-5);
  EXPECT_NEAR(student_t_quantile(0.95, 120), 1.657651, 1e-5);
  EXPECT_NEAR(pooled_t_test(std::vector<double>(50, 1.0), std::vector<double>(50, 1.0)).critical, 1.660, 1e-3);
  EXPECT_EQ(pooled_t_test(std::vector<double>(50, 1.0), std::vector<double>(50, 1.0)).df, 98);
}

TEST(TTestTest, EqualSizesMatchTextbookFormulaAndShift) {
  Rng rng(5);
  std::normal_distribution<double> g(0, 3);
  std::vector<double> a(50), b(50);
  for (auto& v : b) v = g(rng);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = b[i] + 0.7;
  // Same variance; t = shift / sqrt(2 s^2 / n).
  const double s2 = sample_variance(b);
  EXPECT_NEAR(pooled_t_test(a, b).t, 0.7 / std::sqrt(2 * s2 / 50), 1e-9);

  for (auto& v : a) v = g(rng) + 1.0;
  const double direct = (mean(a) - mean(b)) / std::sqrt((sample_variance(a) + sample_variance(b)) / 50);
  EXPECT_NEAR(pooled_t_test(a, b).t, direct, 1e-9);
}

TEST(AggregateTest, HandComputedThreeEpisodes) {
  const std::vector<EpisodeResult> rs{result("twap", 1, -1, 0.5), result("twap", 2, -2, 1.0), result("twap", 6, 0, 1.0)};
  const auto t = aggregate(rs);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].n, 3u);
  EXPECT_DOUBLE_EQ(t[0].mean_is, 3.0);
  EXPECT_DOUBLE_EQ(t[0].mean_pen, -1.0);
  EXPECT_DOUBLE_EQ(t[0].mean_t, 2.5 / 3);
  EXPECT_DOUBLE_EQ(t[0].var_is, 7.0);  // (4 + 1 + 9) / 2
}

TEST(AggregateTest, IdenticalResultsAndErrors) {
  const std::vector<EpisodeResult> same(4, result("random", -3.25, -0.5, 1.0));
  EXPECT_EQ(aggregate(same)[0].var_is, 0.0);
  EXPECT_THROW(aggregate({result("x", 1, 0, 1)}), std::invalid_argument);
  EXPECT_EQ(metrics_columns(), (std::vector<std::string>{"E(IS)", "E(Pen)", "E(T)", "sigma2(IS)"}));
  EXPECT_EQ(metrics_header(), "policy,n,E(IS),E(Pen),E(T),sigma2(IS)\n");
}

TEST(AggregateTest, PoliciesKeepFirstAppearanceOrder) {
  const std::vector<EpisodeResult> rs{result("b", 1, 0, 1), result("a", 1, 0, 1), result("b", 2, 0, 1), result("a", 3, 0, 1)};
  const auto t = aggregate(rs);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].policy, "b");
  EXPECT_EQ(t[1].policy, "a");
}

TEST(HistogramTest, CountsSumAndSingleObservation) {
  Rng rng(8);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> x(1000);
  for (auto& v : x) v = g(rng);
  const auto h = histogram(x, 17);
  EXPECT_EQ(h.edges.size(), 18u);
  EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), 0LL), 1000);
  EXPECT_EQ(h.edges.front(), *std::min_element(x.begin(), x.end()));
  EXPECT_EQ(h.edges.back(), *std::max_element(x.begin(), x.end()));

  const auto one = histogram(std::vector<double>{4.2}, 10);
  EXPECT_EQ(std::count_if(one.counts.begin(), one.counts.end(), [](long long c) { return c > 0; }), 1);
}

TEST(HistogramTest, SymmetricDataGivesSymmetricCounts) {
  std::vector<double> x;
  Rng rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 500; ++i) {
    const double v = std::pow(u(rng), 2) * 3;
    x.push_back(v);
    x.push_back(-v);
  }
  const auto h = histogram(x, 20, -3.0, 3.0);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(h.counts[i], h.counts[19 - i], 1) << i;
}

TEST(ExperimentTest, OneResultPerSeedAndDeterministic) {
  const auto spec = lite_spec();
  const auto seeds = evaluation_seeds(1, 20);
  const auto a = run_experiment({"random", nullptr}, spec, seeds);
  ASSERT_EQ(a.size(), 20u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].seed, seeds[i]);
  const auto b = run_experiment({"random", nullptr}, spec, seeds);
  EXPECT_EQ(episodes_csv(a, "h"), episodes_csv(b, "h"));
}

TEST(ExperimentTest, ParallelEqualsSerial) {
  const auto spec = lite_spec();
  const auto seeds = evaluation_seeds(2, 12);
  const auto serial = run_experiment({"passive", nullptr}, spec, seeds, 1);
  const auto parallel = run_experiment({"passive", nullptr}, spec, seeds, 4);
  EXPECT_EQ(episodes_csv(serial, "h"), episodes_csv(parallel, "h"));
  EXPECT_EQ(metrics_csv(aggregate(serial), "h"), metrics_csv(aggregate(parallel), "h"));
  for (std::size_t i = 0; i < serial.size(); ++i) EXPECT_EQ(serial[i].spreads, parallel[i].spreads);
}

TEST(ExperimentTest, StartupErrors) {
  const auto spec = lite_spec();
  EXPECT_THROW(run_experiment({"rl", nullptr}, spec, {1, 2}), ConfigError);
  EXPECT_THROW(run_experiment({"aggressive", nullptr}, spec, {1, 2}), ConfigError);
  EXPECT_THROW(run_experiment({"twap", nullptr}, spec, {}), std::invalid_argument);
  auto wrong = std::make_shared<dqn::QNetwork>(std::vector<int>{3, 5});
  EXPECT_THROW(run_experiment({"rl", wrong}, spec, {1, 2}), ConfigError);
}

TEST(ExperimentTest, TwapUsesNearlyTheWholeWindow) {
  execenv::EnvSpec spec{execenv::ExecConfig{}, execenv::ConstantBookConfig{}};
  const auto rs = run_experiment({"twap", nullptr}, spec, {1, 2});
  for (const auto& r : rs) {
    EXPECT_NEAR(r.t_frac, 0.998, 0.002);
    EXPECT_EQ(r.children, 1000);
    EXPECT_EQ(r.executed, 20000);
  }
}

TEST(ExperimentTest, ExecutionSamplesOnlyWhenTrading) {
  const auto rs = run_experiment({"random", nullptr}, lite_spec(), {7, 8});
  for (const auto& r : rs) {
    EXPECT_LE(r.imbalances.size(), static_cast<std::size_t>(r.children));
    EXPECT_GT(r.imbalances.size(), 0u);
    for (double s : r.spreads) EXPECT_GE(s, 1.0);
    for (double v : r.imbalances) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(ReportTest, LayoutAndTTestRows) {
  const auto spec = lite_spec();
  EvalOptions opt;
  for (const auto& name : policy_names()) opt.policies.push_back({name, name == "rl" ? random_net(spec.exec) : nullptr});
  opt.seeds = evaluation_seeds(3, 4);
  opt.parallel = 2;
  const auto rep = evaluate(spec, opt);
  ASSERT_EQ(rep.metrics.size(), 4u);
  ASSERT_EQ(rep.ttests.size(), 3u);
  for (const auto& t : rep.ttests) {
    EXPECT_EQ(t.a, "rl");
    EXPECT_EQ(t.result.df, 6);
  }
  const auto dir = scratch("layout");
  write_report(dir, rep, "abc", 10);
  EXPECT_EQ(data_rows(dir / "ttests.csv"), 3);
  EXPECT_EQ(data_rows(dir / "metrics.csv"), 4);
  for (const auto& name : policy_names()) {
    EXPECT_EQ(data_rows(dir / name / "episodes.csv"), 4);
    EXPECT_EQ(data_rows(dir / name / "metrics.csv"), 1);
    for (const char* h : {"hist_is.csv", "hist_spread.csv", "hist_imbalance.csv"}) {
      const auto s = read_file(dir / name / h);
      EXPECT_EQ(s.rfind("# config_hash=abc\n", 0), 0u) << name << h;
      EXPECT_EQ(data_rows(dir / name / h), 10);
    }
  }
  fs::remove_all(dir);
}

TEST(SweepTest, SingleCellReducesToEvaluate) {
  const auto spec = lite_spec();
  EvalOptions opt;
  opt.policies = {{"twap", nullptr}, {"random", nullptr}};
  opt.seeds = evaluation_seeds(4, 3);
  const auto dir = scratch("one");
  const SweepCell cell{"noise", "noise_100", 100, 2};
  const auto st = sweep(dir, spec, {cell}, opt, "h");
  ASSERT_EQ(st.size(), 1u);
  ASSERT_TRUE(st[0].ok) << st[0].error;
  const auto direct = evaluate(spec, opt);
  EXPECT_EQ(metrics_csv(st[0].report->metrics, "h"), metrics_csv(direct.metrics, "h"));
  EXPECT_EQ(data_rows(dir / "table_noise.csv"), 2);
  EXPECT_TRUE(fs::exists(dir / "noise" / "noise_100" / "twap" / "episodes.csv"));
  EXPECT_FALSE(fs::exists(dir / "noise" / "noise_100.partial"));
  fs::remove_all(dir);
}

TEST(SweepTest, FailingCellIsReportedAndOthersContinue) {
  EvalOptions opt;
  opt.policies = {{"random", nullptr}};
  opt.seeds = evaluation_seeds(5, 2);
  const auto dir = scratch("fail");
  std::vector<SweepCell> grid{{"noise", "noise_50", 50, 2}, {"noise", "noise_bad", -1, 2}, {"momentum", "momentum_1", 100, 1}};
  const auto st = sweep(dir, lite_spec(), grid, opt, "h");
  ASSERT_EQ(st.size(), 3u);
  EXPECT_TRUE(st[0].ok);
  EXPECT_FALSE(st[1].ok);
  EXPECT_NE(st[1].error.find("agent counts"), std::string::npos);
  EXPECT_TRUE(st[2].ok);
  EXPECT_EQ(data_rows(dir / "table_noise.csv"), 1);
  EXPECT_EQ(data_rows(dir / "table_momentum.csv"), 1);
  EXPECT_NE(read_file(dir / "sweep_status.csv").find("noise_bad,-1,2,failed"), std::string::npos);
  fs::remove_all(dir);
}

TEST(SweepTest, GridShapeAndDeterministicOutput) {
  const auto g = make_grid({10, 1000, 2000}, 12, {6, 12, 24}, 1000);
  ASSERT_EQ(g.size(), 6u);
  EXPECT_EQ(g[0].name, "noise_10");
  EXPECT_EQ(g[2].n_momentum, 12);
  EXPECT_EQ(g[3].table, "momentum");
  EXPECT_EQ(g[5].n_noise, 1000);
  EXPECT_EQ(g[5].n_momentum, 24);

  EvalOptions opt;
  opt.policies = {{"passive", nullptr}, {"rl", nullptr}};
  opt.seeds = evaluation_seeds(6, 3);
  const std::vector<SweepCell> grid{{"noise", "noise_20", 20, 2}, {"noise", "noise_60", 60, 2}};
  int provided = 0;
  RlProvider provider = [&](const execenv::EnvSpec& s, const SweepCell&) {
    ++provided;
    return random_net(s.exec);
  };
  const auto d1 = scratch("det1"), d2 = scratch("det2");
  sweep(d1, lite_spec(), grid, opt, "h", provider);
  opt.parallel = 3;
  sweep(d2, lite_spec(), grid, opt, "h", provider);
  EXPECT_EQ(provided, 4);
  EXPECT_EQ(read_file(d1 / "table_noise.csv"), read_file(d2 / "table_noise.csv"));
  EXPECT_EQ(read_file(d1 / "ttests_noise.csv"), read_file(d2 / "ttests_noise.csv"));
  EXPECT_EQ(data_rows(d1 / "ttests_noise.csv"), 2);
  fs::remove_all(d1);
  fs::remove_all(d2);
}
