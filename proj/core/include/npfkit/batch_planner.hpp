#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "npfkit/tensor.hpp"

namespace npfkit {

// Byte counts of full high-order tensors overflow 64 bits quickly
// (4251^5 doubles is already 1.1e19 bytes).
__extension__ typedef unsigned __int128 wide_uint;

inline constexpr double kBytesPerGiB = 1024.0 * 1024.0 * 1024.0;

std::string to_string(wide_uint value);
double to_double(wide_uint value);

struct ByteEstimate {
  wide_uint bytes = 0;
  double gib = 0.0;
};

/// product(dims) * element_bytes, reported in bytes and GiB.
ByteEstimate estimate_bytes(std::span<const std::size_t> dims, unsigned element_bytes);

struct PlannerInput {
  std::size_t n_dim = 1;      // tensor rank; an order-N derivative tensor has rank N + 1
  std::size_t n_states = 1;
  double limit_gib = 8.0;     // per-batch limit
  unsigned element_bytes = 8;

  void validate() const;
  wide_uint limit_bytes() const;
};

struct BatchPlan {
  PlannerInput input;
  std::vector<std::size_t> dims;
  std::vector<std::size_t> batch_count;  // BC
  std::vector<std::size_t> max_extent;
  wide_uint per_batch_bytes = 0;         // bytes of a maximal batch
  wide_uint total_bytes = 0;
  wide_uint batches = 1;                 // product(BC)

  double per_batch_gib() const { return to_double(per_batch_bytes) / kBytesPerGiB; }
  double total_gib() const { return to_double(total_bytes) / kBytesPerGiB; }
  std::size_t max_batch_elements() const;
};

/// Greedy last-dimension batching. Dimensions are dropped from the end
/// inward; a dropped dimension whose remaining block still exceeds the limit
/// is fully batched (extent 1), otherwise it gets extent floor(limit / block)
/// and ceil(n_states / extent) batches. Throws InfeasiblePlanError when even
/// a single element exceeds the limit.
BatchPlan plan_batches(const PlannerInput& input);

/// Per-dimension ranges of batch `ordinal` (0-based, outermost batched
/// dimension slowest; remainder batches last in each dimension).
std::vector<IndexRange> batch_ranges(const BatchPlan& plan, wide_uint ordinal);

/// All batches in enumeration order. Throws ArgumentError if the plan has
/// more than `max_batches` batches.
std::vector<std::vector<IndexRange>> enumerate_ranges(const BatchPlan& plan,
                                                      std::size_t max_batches = 1u << 24);

/// Byte footprint of one batch described by its ranges.
wide_uint batch_bytes(std::span<const IndexRange> ranges, unsigned element_bytes);

}  // namespace npfkit
