#include "npfkit/batch_planner.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace npfkit {

std::string to_string(wide_uint value) {
  if (value == 0) return "0";
  std::string digits;
  while (value > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(value % 10)));
    value /= 10;
  }
  std::reverse(digits.begin(), digits.end());
  return digits;
}

double to_double(wide_uint value) { return static_cast<double>(value); }

ByteEstimate estimate_bytes(std::span<const std::size_t> dims, unsigned element_bytes) {
  wide_uint bytes = element_bytes;
  for (std::size_t d : dims) {
    if (d == 0) throw ArgumentError("estimate_bytes: extents must be positive");
    const wide_uint limit = ~wide_uint{0} / d;
    if (bytes > limit) throw ArgumentError("estimate_bytes: byte count exceeds 128-bit range");
    bytes *= d;
  }
  return {bytes, to_double(bytes) / kBytesPerGiB};
}

void PlannerInput::validate() const {
  if (n_dim < 1) throw ArgumentError("planner: n_dim must be at least 1");
  if (n_states < 1) throw ArgumentError("planner: n_states must be at least 1");
  if (!(limit_gib > 0.0) || !std::isfinite(limit_gib)) throw ArgumentError("planner: memory limit must be positive");
  if (element_bytes != 4 && element_bytes != 8 && element_bytes != 16) {
    throw ArgumentError("planner: element width must be 4, 8 or 16 bytes");
  }
}

wide_uint PlannerInput::limit_bytes() const {
  return static_cast<wide_uint>(std::floor(static_cast<long double>(limit_gib) * kBytesPerGiB));
}

std::size_t BatchPlan::max_batch_elements() const {
  std::size_t e = 1;
  for (std::size_t x : max_extent) e *= x;
  return e;
}

BatchPlan plan_batches(const PlannerInput& input) {
  input.validate();
  const std::size_t n = input.n_states;
  const unsigned b = input.element_bytes;
  const wide_uint limit = input.limit_bytes();

  BatchPlan plan;
  plan.input = input;
  plan.dims.assign(input.n_dim, n);
  plan.batch_count.assign(input.n_dim, 1);
  plan.max_extent.assign(input.n_dim, n);
  plan.total_bytes = estimate_bytes(plan.dims, b).bytes;

  wide_uint block = plan.total_bytes;
  std::size_t kept = input.n_dim;
  while (block > limit) {
    if (kept == 0) {
      throw InfeasiblePlanError(fmt::format(
          "no batching fits a {} GiB limit: a single {}-byte element exceeds it", input.limit_gib, b));
    }
    --kept;
    const std::vector<std::size_t> remaining(kept, n);
    const wide_uint reduced = estimate_bytes(remaining, b).bytes;
    if (reduced > limit) {
      plan.batch_count[kept] = n;
      plan.max_extent[kept] = 1;
    } else {
      const wide_uint fit = limit / reduced;
      const std::size_t extent = static_cast<std::size_t>(std::min<wide_uint>(fit, n));
      plan.max_extent[kept] = extent;
      plan.batch_count[kept] = (n + extent - 1) / extent;
    }
    block = reduced;
  }

  plan.batches = 1;
  for (std::size_t c : plan.batch_count) plan.batches *= c;
  plan.per_batch_bytes = estimate_bytes(plan.max_extent, b).bytes;
  return plan;
}

std::vector<IndexRange> batch_ranges(const BatchPlan& plan, wide_uint ordinal) {
  if (ordinal >= plan.batches) throw ArgumentError("batch ordinal out of range");
  std::vector<IndexRange> ranges(plan.dims.size());
  for (std::size_t d = plan.dims.size(); d-- > 0;) {
    const std::size_t count = plan.batch_count[d];
    const std::size_t digit = static_cast<std::size_t>(ordinal % count);
    ordinal /= count;
    const std::size_t start = digit * plan.max_extent[d];
    ranges[d] = {start, std::min(plan.dims[d], start + plan.max_extent[d])};
  }
  return ranges;
}

std::vector<std::vector<IndexRange>> enumerate_ranges(const BatchPlan& plan, std::size_t max_batches) {
  if (plan.batches > max_batches) {
    throw ArgumentError(fmt::format("plan has {} batches, more than the enumeration cap {}",
                                    to_string(plan.batches), max_batches));
  }
  std::vector<std::vector<IndexRange>> out;
  out.reserve(static_cast<std::size_t>(plan.batches));
  for (wide_uint b = 0; b < plan.batches; ++b) out.push_back(batch_ranges(plan, b));
  return out;
}

wide_uint batch_bytes(std::span<const IndexRange> ranges, unsigned element_bytes) {
  wide_uint bytes = element_bytes;
  for (const auto& r : ranges) bytes *= r.width();
  return bytes;
}

}  // namespace npfkit
