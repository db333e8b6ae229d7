#include "npfkit/workspace.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace npfkit {

void WorkspaceBudget::Lease::release() noexcept {
  if (owner_) {
    owner_->current_ -= bytes_;
    owner_ = nullptr;
  }
}

WorkspaceBudget::Lease WorkspaceBudget::reserve(std::size_t bytes) {
  if (current_ + bytes > limit_) {
    throw InternalMemoryError(fmt::format("workspace budget exceeded: {} + {} bytes > limit {}",
                                          current_, bytes, limit_));
  }
  current_ += bytes;
  peak_ = std::max(peak_, current_);
  return Lease(this, bytes);
}

}  // namespace npfkit
