#pragma once

#include <execsim/lob/types.hpp>
#include <execsim/market/rng.hpp>

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

namespace execsim::market {

using lob::Timestamp;

// Mean-reverting fundamental with bimodal jumps:
//   dX = theta (mu - X) dt + sigma dW + J dN,  J ~ 1/2 N(+jump_mu, s^2) + 1/2 N(-jump_mu, s^2).
// Rates are per nanosecond; prices in cents.
struct FundamentalParams {
  double theta{1.67e-16};
  double mu{100000.0};
  double sigma{5e-10};
  double lambda{2.77778e-18};
  double jump_mu{1000.0};
  double jump_sigma{223.60679774997897};  // sqrt(50000)

  void validate() const {
    if (!(theta >= 0.0) || !(sigma >= 0.0) || !(lambda >= 0.0) || !(jump_sigma >= 0.0)) {
      throw std::invalid_argument("fundamental: theta, sigma, lambda and jump_sigma must be >= 0");
    }
  }
};

// Exact transition of the OU part over dt, followed by Poisson(lambda dt) jumps.
inline double fundamental_step(double x, Timestamp dt, const FundamentalParams& p, Rng& rng) {
  if (dt <= 0) throw std::invalid_argument("fundamental_step: dt must be > 0");
  const double t = static_cast<double>(dt);
  double mean = x;
  double var = p.sigma * p.sigma * t;
  if (p.theta > 0.0) {
    mean = p.mu + (x - p.mu) * std::exp(-p.theta * t);
    var = p.sigma * p.sigma * (-std::expm1(-2.0 * p.theta * t)) / (2.0 * p.theta);
  }
  double next = mean;
  if (var > 0.0) next += std::sqrt(var) * std::normal_distribution<double>(0.0, 1.0)(rng);
  if (p.lambda > 0.0) {
    const auto jumps = std::poisson_distribution<long>(p.lambda * t)(rng);
    std::normal_distribution<double> jump(0.0, 1.0);
    for (long j = 0; j < jumps; ++j) {
      const double sign = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
      next += sign * p.jump_mu + p.jump_sigma * jump(rng);
    }
  }
  return next;
}

// One realisation of the fundamental per session, generated lazily at query times
// and cached so every agent sees the same path. Queries must be non-decreasing in
// time except for already-cached timestamps.
class FundamentalPath {
 public:
  FundamentalPath(FundamentalParams params, std::uint64_t seed, double x0)
      : params_(params), rng_(seed), last_t_(0), last_x_(x0) {
    cache_.emplace(0, x0);
  }

  double at(Timestamp t) {
    if (t == last_t_) return last_x_;
    if (t < last_t_) {
      auto it = cache_.find(t);
      if (it == cache_.end()) throw std::logic_error("FundamentalPath: query before last generated time");
      return it->second;
    }
    last_x_ = fundamental_step(last_x_, t - last_t_, params_, rng_);
    last_t_ = t;
    cache_.emplace(t, last_x_);
    return last_x_;
  }

  [[nodiscard]] const FundamentalParams& params() const noexcept { return params_; }

 private:
  FundamentalParams params_;
  Rng rng_;
  Timestamp last_t_;
  double last_x_;
  std::map<Timestamp, double> cache_;
};

// Noisy view of the fundamental for one agent. Repeated queries at the same
// timestamp return the same draw.
class OracleObserver {
 public:
  OracleObserver(std::uint64_t seed, double noise_var) : rng_(seed), noise_sd_(std::sqrt(noise_var)) {
    if (!(noise_var >= 0.0)) throw std::invalid_argument("oracle: noise variance must be >= 0");
  }

  double observe(FundamentalPath& path, Timestamp t) {
    if (has_last_ && t == last_t_) return last_obs_;
    double obs = path.at(t);
    if (noise_sd_ > 0.0) obs += noise_sd_ * std::normal_distribution<double>(0.0, 1.0)(rng_);
    has_last_ = true;
    last_t_ = t;
    last_obs_ = obs;
    return obs;
  }

 private:
  Rng rng_;
  double noise_sd_;
  bool has_last_{false};
  Timestamp last_t_{0};
  double last_obs_{0.0};
};

}  // namespace execsim::market
