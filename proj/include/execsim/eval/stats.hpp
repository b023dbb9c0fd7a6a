#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace execsim::eval {

inline double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean of an empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Unbiased sample variance, two-pass.
inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("variance needs at least two observations");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

// Upper quantile of Student's t.
inline double student_t_quantile(double p, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("student t: df must be > 0");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("student t: p must lie in (0, 1)");
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

struct TTestResult {
  double t{0.0};
  int df{0};
  double critical{0.0};
  bool reject{false};
  double mean_a{0.0}, mean_b{0.0};
};

// One-sided two-sample test with pooled variance, H1: E(a) > E(b).
inline TTestResult pooled_t_test(std::span<const double> a, std::span<const double> b, double level = 0.05) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("t test: each sample needs at least two observations");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  TTestResult r;
  r.df = static_cast<int>(a.size() + b.size() - 2);
  r.critical = student_t_quantile(1.0 - level, r.df);
  r.mean_a = mean(a);
  r.mean_b = mean(b);
  const double sp2 = ((na - 1) * sample_variance(a) + (nb - 1) * sample_variance(b)) / r.df;
  const double diff = r.mean_a - r.mean_b;
  if (sp2 == 0.0) {
    r.t = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  } else {
    r.t = diff / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
  }
  r.reject = r.t > r.critical;
  return r;
}

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges
  std::vector<long long> counts;
};

// Equal-width bins over [lo, hi]; the last bin is closed. Values outside the
// range are clamped into the end bins.
inline Histogram histogram(std::span<const double> x, int bins, double lo, double hi) {
  if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
  if (!(hi > lo)) throw std::invalid_argument("histogram: empty range");
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : x) {
    const double u = (v - lo) / (hi - lo) * bins;
    const int i = std::clamp(static_cast<int>(std::floor(u)), 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(i)];
  }
  return h;
}

// Range of the data, widened by one unit around a single distinct value.
inline std::pair<double, double> histogram_range(std::span<const double> x) {
  if (x.empty()) return {0.0, 1.0};
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  if (*mn == *mx) return {*mn - 0.5, *mx + 0.5};
  return {*mn, *mx};
}

inline Histogram histogram(std::span<const double> x, int bins) {
  const auto [lo, hi] = histogram_range(x);
  return histogram(x, bins, lo, hi);
}

}  // namespace execsim::eval
