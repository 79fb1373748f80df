#pragma once

#include <functional>
#include <vector>

#include "dvbf/diff/tensor.hpp"

namespace dvbf::diff {

// Straight-line record of differentiable primitives. Operations append a
// backward closure while a tape is active on the current thread; with no
// active tape they only compute values.
template <typename T>
class Tape {
 public:
  // Makes a tape active on this thread for the lifetime of the scope.
  class Scope {
   public:
    explicit Scope(Tape& tape) : previous_(active_) { active_ = &tape; }
    ~Scope() { active_ = previous_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  // Suspends recording (evaluation mode) for the lifetime of the guard.
  class NoGrad {
   public:
    NoGrad() : previous_(active_) { active_ = nullptr; }
    ~NoGrad() { active_ = previous_; }
    NoGrad(const NoGrad&) = delete;
    NoGrad& operator=(const NoGrad&) = delete;

   private:
    Tape* previous_;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return active_; }

  void record(std::function<void()> backward) { nodes_.push_back(std::move(backward)); }

  std::size_t size() const { return nodes_.size(); }

  void clear() { nodes_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and replays the record in reverse. Each node
  // runs exactly once; the tape is consumed.
  void backward(Tensor<T>& loss) {
    if (loss.numel() != 1) {
      throw ContractError("backward requires a scalar loss, got shape " + to_string(loss.shape()));
    }
    if (!loss.requires_grad()) {
      throw ContractError("backward: loss is not on the active tape");
    }
    loss.grads()[0] += T{1};
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    nodes_.clear();
  }

 private:
  static inline thread_local Tape* active_ = nullptr;
  std::vector<std::function<void()>> nodes_;
};

}  // namespace dvbf::diff
