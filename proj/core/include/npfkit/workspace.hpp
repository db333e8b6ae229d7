#pragma once

#include <cstddef>
#include <utility>

#include "npfkit/tensor.hpp"

namespace npfkit {

/// Byte accounting for transient engine tensors. One instance per worker;
/// not thread-safe.
class WorkspaceBudget {
 public:
  class Lease {
   public:
    Lease() = default;
    Lease(const Lease&) = delete;
    Lease& operator=(const Lease&) = delete;
    Lease(Lease&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)), bytes_(other.bytes_) {}
    Lease& operator=(Lease&& other) noexcept {
      if (this != &other) {
        release();
        owner_ = std::exchange(other.owner_, nullptr);
        bytes_ = other.bytes_;
      }
      return *this;
    }
    ~Lease() { release(); }

    void release() noexcept;
    std::size_t bytes() const noexcept { return owner_ ? bytes_ : 0; }

   private:
    friend class WorkspaceBudget;
    Lease(WorkspaceBudget* owner, std::size_t bytes) : owner_(owner), bytes_(bytes) {}

    WorkspaceBudget* owner_ = nullptr;
    std::size_t bytes_ = 0;
  };

  explicit WorkspaceBudget(std::size_t limit_bytes) : limit_(limit_bytes) {}

  /// Throws InternalMemoryError if the reservation would exceed the limit.
  Lease reserve(std::size_t bytes);

  /// True if `bytes` more would still fit.
  bool fits(std::size_t bytes) const noexcept { return current_ + bytes <= limit_; }

  std::size_t limit() const noexcept { return limit_; }
  std::size_t current() const noexcept { return current_; }
  std::size_t peak() const noexcept { return peak_; }

 private:
  std::size_t limit_;
  std::size_t current_ = 0;
  std::size_t peak_ = 0;
};

/// A tensor together with the budget lease that accounts for it.
template <typename T>
struct Tracked {
  DenseTensor<T> tensor;
  WorkspaceBudget::Lease lease;

  void reset() {
    tensor = DenseTensor<T>();
    lease.release();
  }
};

}  // namespace npfkit
