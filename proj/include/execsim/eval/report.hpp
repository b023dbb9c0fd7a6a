#pragma once

#include <execsim/eval/experiment.hpp>
#include <execsim/eval/stats.hpp>
#include <execsim/util/fs.hpp>
#include <execsim/util/hash.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace execsim::eval {

namespace fs = std::filesystem;

struct MetricsRow {
  std::string policy;
  std::size_t n{0};
  double mean_is{0.0};
  double mean_pen{0.0};
  double mean_t{0.0};
  double var_is{0.0};
};

using MetricsTable = std::vector<MetricsRow>;

inline const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols{"E(IS)", "E(Pen)", "E(T)", "sigma2(IS)"};
  return cols;
}

inline std::vector<double> column_is(const std::vector<EpisodeResult>& rs) {
  std::vector<double> v;
  for (const auto& r : rs) v.push_back(r.is);
  return v;
}

// One row per policy, in order of first appearance.
inline MetricsTable aggregate(const std::vector<EpisodeResult>& results) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const EpisodeResult*>> by;
  for (const auto& r : results) {
    if (!by.count(r.policy)) order.push_back(r.policy);
    by[r.policy].push_back(&r);
  }
  MetricsTable t;
  for (const auto& name : order) {
    const auto& rs = by[name];
    if (rs.size() < 2) throw std::invalid_argument("aggregate: policy " + name + " has fewer than two episodes");
    std::vector<double> is, pen, tf;
    for (const auto* r : rs) {
      is.push_back(r->is);
      pen.push_back(r->pen);
      tf.push_back(r->t_frac);
    }
    t.push_back({name, rs.size(), mean(is), mean(pen), mean(tf), sample_variance(is)});
  }
  return t;
}

struct TTestRow {
  std::string a, b;
  TTestResult result;
};

// --- CSV ---------------------------------------------------------------------

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string episodes_csv(const std::vector<EpisodeResult>& rs, std::string_view hash) {
  std::ostringstream os;
  os << config_hash_line(hash)
     << "policy,seed,IS,Pen,T,total_reward,executed,final_inventory,steps,children,fills\n";
  for (const auto& r : rs)
    os << r.policy << ',' << r.seed << ',' << fmt(r.is) << ',' << fmt(r.pen) << ',' << fmt(r.t_frac) << ','
       << fmt(r.total_reward) << ',' << r.executed << ',' << r.final_inventory << ',' << r.steps << ','
       << r.children << ',' << r.n_fills << '\n';
  return os.str();
}

inline std::string metrics_header(std::string_view lead = "policy") {
  std::string h(lead);
  h += ",n";
  for (const auto& c : metrics_columns()) h += "," + c;
  return h + "\n";
}

inline std::string metrics_line(const MetricsRow& m) {
  return m.policy + "," + std::to_string(m.n) + "," + fmt(m.mean_is) + "," + fmt(m.mean_pen) + "," + fmt(m.mean_t) +
         "," + fmt(m.var_is) + "\n";
}

inline std::string metrics_csv(const MetricsTable& t, std::string_view hash) {
  std::string s = config_hash_line(hash) + metrics_header();
  for (const auto& m : t) s += metrics_line(m);
  return s;
}

inline std::string ttest_header() { return "policy_a,policy_b,t,df,critical,reject,mean_a,mean_b\n"; }

inline std::string ttest_line(const TTestRow& r) {
  const auto& t = r.result;
  return r.a + "," + r.b + "," + fmt(t.t) + "," + std::to_string(t.df) + "," + fmt(t.critical) + "," +
         (t.reject ? "1" : "0") + "," + fmt(t.mean_a) + "," + fmt(t.mean_b) + "\n";
}

inline std::string ttests_csv(const std::vector<TTestRow>& rows, std::string_view hash) {
  std::string s = config_hash_line(hash) + ttest_header();
  for (const auto& r : rows) s += ttest_line(r);
  return s;
}

inline std::string histogram_csv(const Histogram& h, std::string_view hash) {
  std::string s = config_hash_line(hash) + "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    s += fmt(h.edges[i]) + "," + fmt(h.edges[i + 1]) + "," + std::to_string(h.counts[i]) + "\n";
  return s;
}

// --- evaluate ------------------------------------------------------------------

struct EvalOptions {
  std::vector<PolicySpec> policies;
  std::vector<std::uint64_t> seeds;
  int parallel{1};
  int bins{30};
};

struct EvalReport {
  std::vector<std::vector<EpisodeResult>> results;  // per policy, seed order
  MetricsTable metrics;
  std::vector<TTestRow> ttests;  // rl against every other policy
};

inline std::vector<TTestRow> rl_ttests(const std::vector<std::vector<EpisodeResult>>& per_policy) {
  std::vector<TTestRow> rows;
  const std::vector<EpisodeResult>* rl = nullptr;
  for (const auto& rs : per_policy)
    if (!rs.empty() && rs.front().policy == "rl") rl = &rs;
  if (!rl) return rows;
  const auto a = column_is(*rl);
  for (const auto& rs : per_policy) {
    if (rs.empty() || &rs == rl) continue;
    rows.push_back({"rl", rs.front().policy, pooled_t_test(a, column_is(rs))});
  }
  return rows;
}

inline EvalReport evaluate(const execenv::EnvSpec& spec, const EvalOptions& opt) {
  if (opt.policies.empty()) throw ConfigError("evaluate: no policies");
  if (opt.seeds.size() < 2) throw ConfigError("evaluate: at least two episodes per policy");
  EvalReport rep;
  std::vector<EpisodeResult> all;
  for (const auto& p : opt.policies) {
    rep.results.push_back(run_experiment(p, spec, opt.seeds, opt.parallel));
    all.insert(all.end(), rep.results.back().begin(), rep.results.back().end());
  }
  rep.metrics = aggregate(all);
  rep.ttests = rl_ttests(rep.results);
  return rep;
}

// <dir>/metrics.csv and ttests.csv across policies, and per policy
// <dir>/<policy>/{episodes,metrics,hist_is,hist_spread,hist_imbalance}.csv.
// Histogram edges are shared across policies so distributions overlay.
inline void write_report(const fs::path& dir, const EvalReport& rep, std::string_view hash, int bins) {
  using Pick = std::function<std::vector<double>(const EpisodeResult&)>;
  const std::vector<std::pair<std::string, Pick>> metrics{
      {"is", [](const EpisodeResult& r) { return std::vector<double>{r.is}; }},
      {"spread", [](const EpisodeResult& r) { return r.spreads; }},
      {"imbalance", [](const EpisodeResult& r) { return r.imbalances; }},
  };
  for (const auto& [name, pick] : metrics) {
    std::vector<std::vector<double>> values(rep.results.size());
    std::vector<double> pooled;
    for (std::size_t p = 0; p < rep.results.size(); ++p) {
      for (const auto& r : rep.results[p]) {
        auto v = pick(r);
        values[p].insert(values[p].end(), v.begin(), v.end());
      }
      pooled.insert(pooled.end(), values[p].begin(), values[p].end());
    }
    const auto [lo, hi] = histogram_range(pooled);
    for (std::size_t p = 0; p < rep.results.size(); ++p) {
      const auto& policy = rep.results[p].front().policy;
      write_file_atomic(dir / policy / ("hist_" + name + ".csv"), histogram_csv(histogram(values[p], bins, lo, hi), hash));
    }
  }
  for (std::size_t p = 0; p < rep.results.size(); ++p) {
    const auto& policy = rep.results[p].front().policy;
    write_file_atomic(dir / policy / "episodes.csv", episodes_csv(rep.results[p], hash));
    write_file_atomic(dir / policy / "metrics.csv", metrics_csv({rep.metrics[p]}, hash));
  }
  write_file_atomic(dir / "metrics.csv", metrics_csv(rep.metrics, hash));
  write_file_atomic(dir / "ttests.csv", ttests_csv(rep.ttests, hash));
}

// --- sweep ---------------------------------------------------------------------

struct SweepCell {
  std::string table;  // "noise" or "momentum"
  std::string name;
  int n_noise{0};
  int n_momentum{0};
};

// Noise counts at a fixed momentum count, then momentum counts at a fixed noise count.
inline std::vector<SweepCell> make_grid(const std::vector<int>& noise, int momentum_fixed, const std::vector<int>& momentum,
                                        int noise_fixed) {
  std::vector<SweepCell> g;
  for (int n : noise) g.push_back({"noise", "noise_" + std::to_string(n), n, momentum_fixed});
  for (int m : momentum) g.push_back({"momentum", "momentum_" + std::to_string(m), noise_fixed, m});
  return g;
}

struct CellStatus {
  SweepCell cell;
  bool ok{false};
  std::string error;
  std::optional<EvalReport> report;
};

// Supplies the rl network for a cell when the options carry rl without one.
using RlProvider = std::function<std::shared_ptr<const dqn::QNetwork>(const execenv::EnvSpec&, const SweepCell&)>;

inline execenv::EnvSpec cell_spec(const execenv::EnvSpec& base, const SweepCell& c) {
  auto spec = base;
  auto* sim = std::get_if<execenv::SimulatedMarketConfig>(&spec.venue);
  if (!sim) throw ConfigError("sweep needs the simulated market venue");
  sim->market.population.n_noise = c.n_noise;
  sim->market.population.n_momentum = c.n_momentum;
  return spec;
}

// Each cell is written to <dir>/<table>/<cell> through a staging directory, so
// an interrupted run leaves finished cells intact. A failing cell is recorded
// and the remaining cells still run. Summary tables cover the cells that finished.
inline std::vector<CellStatus> sweep(const fs::path& dir, const execenv::EnvSpec& base, const std::vector<SweepCell>& grid,
                                     const EvalOptions& opt, std::string_view hash, const RlProvider& rl = {},
                                     const std::function<void(const CellStatus&)>& on_cell = {}) {
  std::vector<CellStatus> out;
  for (const auto& c : grid) {
    CellStatus st{c, false, {}, {}};
    try {
      const auto spec = cell_spec(base, c);
      auto cell_opt = opt;
      for (auto& p : cell_opt.policies) {
        if (p.name == "rl" && !p.net) {
          if (!rl) throw ConfigError("rl in a sweep needs a checkpoint or training");
          p.net = rl(spec, c);
        }
      }
      auto rep = evaluate(spec, cell_opt);
      const fs::path final_dir = dir / c.table / c.name;
      fs::path staging = final_dir;
      staging += ".partial";
      fs::remove_all(staging);
      write_report(staging, rep, hash, opt.bins);
      fs::remove_all(final_dir);
      fs::rename(staging, final_dir);
      st.ok = true;
      st.report = std::move(rep);
    } catch (const std::exception& e) {
      st.error = e.what();
    }
    if (on_cell) on_cell(st);
    out.push_back(std::move(st));
  }

  std::map<std::string, std::pair<std::string, std::string>> tables;  // table -> (metrics, ttests)
  std::string status = config_hash_line(hash) + "table,cell,n_noise,n_momentum,status,message\n";
  for (const auto& st : out) {
    const auto& c = st.cell;
    std::string msg = st.error;
    for (auto& ch : msg)
      if (ch == ',' || ch == '\n') ch = ' ';
    status += c.table + "," + c.name + "," + std::to_string(c.n_noise) + "," + std::to_string(c.n_momentum) + "," +
              (st.ok ? "ok" : "failed") + "," + msg + "\n";
    auto& [m, t] = tables[c.table];
    if (m.empty()) {
      m = config_hash_line(hash) + "n_noise,n_momentum," + metrics_header();
      t = config_hash_line(hash) + "n_noise,n_momentum," + ttest_header();
    }
    if (!st.ok) continue;
    const std::string lead = std::to_string(c.n_noise) + "," + std::to_string(c.n_momentum) + ",";
    for (const auto& row : st.report->metrics) m += lead + metrics_line(row);
    for (const auto& row : st.report->ttests) t += lead + ttest_line(row);
  }
  for (const auto& [name, mt] : tables) {
    write_file_atomic(dir / ("table_" + name + ".csv"), mt.first);
    write_file_atomic(dir / ("ttests_" + name + ".csv"), mt.second);
  }
  write_file_atomic(dir / "sweep_status.csv", status);
  return out;
}

}  // namespace execsim::eval
