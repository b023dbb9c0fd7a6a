#pragma once

#include <execsim/market/rng.hpp>

#include <algorithm>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

namespace execsim::dqn {

struct Transition {
  std::vector<double> s;
  int a{0};
  double r{0.0};
  std::vector<double> s_next;
  bool done{false};
};

// Fixed-capacity ring buffer; once full, the oldest transition is overwritten.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay: capacity must be > 0");
    data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);
    }
    head_ = (head_ + 1) % capacity_;
  }

  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
  [[nodiscard]] const Transition& at(std::size_t i) const { return data_.at(i); }

  // Distinct uniform indices; n must not exceed size().
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    if (n > data_.size()) throw std::invalid_argument("replay: batch larger than memory");
    std::vector<std::size_t> out;
    out.reserve(n);
    if (2 * n > data_.size()) {
      // Dense case: partial Fisher-Yates over all indices.
      std::vector<std::size_t> idx(data_.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
        out.push_back(idx[i]);
      }
      return out;
    }
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    while (out.size() < n) {
      const std::size_t i = pick(rng);
      if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
    }
    return out;
  }

  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const {
    std::vector<const Transition*> out;
    for (std::size_t i : sample_indices(n, rng)) out.push_back(&data_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_{0};
  std::vector<Transition> data_;
};

}  // namespace execsim::dqn
