#pragma once

#include <chrono>
#include <optional>

#include "npfkit/errors.hpp"

namespace npfkit {

/// Cooperative wall-clock limit checked from long-running loops.
class Deadline {
 public:
  using clock = std::chrono::steady_clock;

  Deadline() = default;
  explicit Deadline(std::chrono::duration<double> budget)
      : until_(clock::now() + std::chrono::duration_cast<clock::duration>(budget)) {}

  static Deadline none() { return {}; }

  bool expired() const { return until_ && clock::now() >= *until_; }
  void check() const {
    if (expired()) throw TimeoutError("time limit exceeded");
  }

 private:
  std::optional<clock::time_point> until_;
};

}  // namespace npfkit
