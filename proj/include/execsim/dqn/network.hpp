#pragma once

#include <execsim/market/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace execsim::dqn {

struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class OptimizerKind { Adam, Sgd };

inline const char* to_string(OptimizerKind k) noexcept { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

// Fully connected net, ReLU on hidden layers, identity output. All weights and
// biases live in one flat vector: per layer W (out x in, row-major) then b.
class QNetwork {
 public:
  QNetwork() = default;
  explicit QNetwork(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("QNetwork: need at least input and output sizes");
    for (int s : sizes_)
      if (s < 1) throw std::invalid_argument("QNetwork: layer sizes must be >= 1");
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      w_off_.push_back(off);
      off += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]);
      b_off_.push_back(off);
      off += static_cast<std::size_t>(sizes_[l + 1]);
    }
    params_.assign(off, 0.0);
  }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init(Rng& rng) {
    for (std::size_t l = 0; l < n_layers(); ++l) {
      const double lim = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      std::uniform_real_distribution<double> u(-lim, lim);
      for (std::size_t i = w_off_[l]; i < b_off_[l] + static_cast<std::size_t>(sizes_[l + 1]); ++i) params_[i] = u(rng);
    }
  }

  [[nodiscard]] const std::vector<int>& sizes() const noexcept { return sizes_; }
  [[nodiscard]] int input_size() const noexcept { return sizes_.front(); }
  [[nodiscard]] int output_size() const noexcept { return sizes_.back(); }
  [[nodiscard]] std::size_t n_layers() const noexcept { return sizes_.size() - 1; }
  [[nodiscard]] std::vector<double>& params() noexcept { return params_; }
  [[nodiscard]] const std::vector<double>& params() const noexcept { return params_; }
  // Offsets of layer l's weights and biases in params().
  [[nodiscard]] std::size_t weight_offset(std::size_t l) const { return w_off_.at(l); }
  [[nodiscard]] std::size_t bias_offset(std::size_t l) const { return b_off_.at(l); }

  [[nodiscard]] bool all_finite() const {
    return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
  }

  [[nodiscard]] std::vector<double> forward(std::span<const double> s) const {
    check_input(s);
    std::vector<double> a(s.begin(), s.end()), z;
    for (std::size_t l = 0; l < n_layers(); ++l) {
      affine(l, a, z);
      if (l + 1 < n_layers())
        for (double& v : z) v = std::max(0.0, v);
      a.swap(z);
    }
    return a;
  }

  // Per-sample activations kept for backprop: acts[0] = input, acts[l+1] = layer l output.
  struct Tape {
    std::vector<std::vector<double>> acts;
  };

  std::vector<double> forward(std::span<const double> s, Tape& tape) const {
    check_input(s);
    tape.acts.assign(n_layers() + 1, {});
    tape.acts[0].assign(s.begin(), s.end());
    for (std::size_t l = 0; l < n_layers(); ++l) {
      affine(l, tape.acts[l], tape.acts[l + 1]);
      if (l + 1 < n_layers())
        for (double& v : tape.acts[l + 1]) v = std::max(0.0, v);
    }
    return tape.acts.back();
  }

  // Accumulates d(loss)/d(params) into grad given d(loss)/d(output) for one sample.
  void backward(const Tape& tape, std::vector<double> delta, std::vector<double>& grad) const {
    for (std::size_t l = n_layers(); l-- > 0;) {
      const auto in = static_cast<std::size_t>(sizes_[l]);
      const auto out = static_cast<std::size_t>(sizes_[l + 1]);
      const auto& x = tape.acts[l];
      double* gw = grad.data() + w_off_[l];
      double* gb = grad.data() + b_off_[l];
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* row = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) row[i] += d * x[i];
      }
      if (l == 0) break;
      std::vector<double> prev(in, 0.0);
      const double* w = params_.data() + w_off_[l];
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) prev[i] += d * row[i];
      }
      // ReLU derivative on the layer below (its stored output).
      for (std::size_t i = 0; i < in; ++i)
        if (x[i] <= 0.0) prev[i] = 0.0;
      delta.swap(prev);
    }
  }

 private:
  void check_input(std::span<const double> s) const {
    if (static_cast<int>(s.size()) != input_size()) throw std::invalid_argument("QNetwork: input size mismatch");
    for (double v : s)
      if (!std::isfinite(v)) throw NonFiniteError("QNetwork: non-finite input");
  }

  void affine(std::size_t l, const std::vector<double>& x, std::vector<double>& z) const {
    const auto in = static_cast<std::size_t>(sizes_[l]);
    const auto out = static_cast<std::size_t>(sizes_[l + 1]);
    const double* w = params_.data() + w_off_[l];
    const double* b = params_.data() + b_off_[l];
    z.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = w + o * in;
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
      z[o] = acc;
    }
  }

  std::vector<int> sizes_;
  std::vector<std::size_t> w_off_, b_off_;
  std::vector<double> params_;
};

// Lowest index wins ties.
inline int argmax(std::span<const double> q) {
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

// First-order optimizer over a flat parameter vector.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : kind_(kind), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (kind_ == OptimizerKind::Adam) {
      m_.assign(n, 0.0);
      v_.assign(n, 0.0);
    }
  }

  void apply(std::vector<double>& params, const std::vector<double>& grad, double lr) {
    if (lr == 0.0) return;
    if (kind_ == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
      return;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

  [[nodiscard]] OptimizerKind kind() const noexcept { return kind_; }
  [[nodiscard]] long long t() const noexcept { return t_; }
  [[nodiscard]] const std::vector<double>& m() const noexcept { return m_; }
  [[nodiscard]] const std::vector<double>& v() const noexcept { return v_; }
  void restore(long long t, std::vector<double> m, std::vector<double> v) {
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  OptimizerKind kind_{OptimizerKind::Adam};
  double beta1_{0.9}, beta2_{0.999}, eps_{1e-8};
  long long t_{0};
  std::vector<double> m_, v_;
};

}  // namespace execsim::dqn
