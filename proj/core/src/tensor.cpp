#include "npfkit/tensor.hpp"

#include <limits>

#include <fmt/format.h>

namespace npfkit {

void check_range(const IndexRange& range, std::size_t extent, const char* what) {
  if (range.start >= range.end || range.end > extent) {
    throw ArgumentError(fmt::format("{}: invalid range [{}, {}) for extent {}", what, range.start,
                                    range.end, extent));
  }
}

std::size_t element_count(const Shape& shape) {
  std::size_t count = 1;
  for (std::size_t e : shape) {
    if (e != 0 && count > std::numeric_limits<std::size_t>::max() / e) {
      throw ArgumentError("element count overflows size_t for shape " + shape_string(shape));
    }
    count *= e;
  }
  return count;
}

std::vector<std::size_t> row_major_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t d = shape.size(); d-- > 1;) strides[d - 1] = strides[d] * shape[d];
  return strides;
}

std::string shape_string(const Shape& shape) { return fmt::format("({})", fmt::join(shape, ", ")); }

void resonance_divide_inplace(ComplexTensor& c, const AxisEigenvalues& axes, double epsilon) {
  if (!(epsilon > 0.0)) throw ArgumentError("resonance_divide: epsilon must be positive");
  const std::size_t rank = c.rank();
  if (axes.size() != rank) throw DimensionError("resonance_divide: one eigenvalue list per axis required");
  for (std::size_t d = 0; d < rank; ++d) {
    if (axes[d].size() != c.extent(d)) {
      throw DimensionError(fmt::format("resonance_divide: axis {} has extent {} but {} eigenvalues",
                                       d, c.extent(d), axes[d].size()));
    }
  }
  auto data = c.values();
  if (rank == 1) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] /= clamp_denominator(-axes[0][i], epsilon);
    return;
  }

  // Odometer over all axes but the last; the last axis is the inner loop.
  const std::size_t last = rank - 1;
  const std::size_t inner = c.extent(last);
  const std::span<const complex_t> tail = axes[last];
  std::vector<std::size_t> idx(last, 0);
  auto prefix_sum = [&] {
    complex_t s = -axes[0][idx[0]];
    for (std::size_t d = 1; d < last; ++d) s += axes[d][idx[d]];
    return s;
  };
  complex_t partial = prefix_sum();

  const std::size_t outer = data.size() / inner;
  for (std::size_t o = 0; o < outer; ++o) {
    complex_t* row = data.data() + o * inner;
    for (std::size_t x = 0; x < inner; ++x) row[x] /= clamp_denominator(partial + tail[x], epsilon);
    for (std::size_t d = last; d-- > 0;) {
      if (++idx[d] < c.extent(d)) break;
      idx[d] = 0;
    }
    partial = prefix_sum();
  }
}

ComplexTensor resonance_divide(const ComplexTensor& c, const AxisEigenvalues& axes, double epsilon) {
  ComplexTensor out = c;
  resonance_divide_inplace(out, axes, epsilon);
  return out;
}

ComplexTensor resonance_divide(const ComplexTensor& c, std::span<const complex_t> lambda,
                               double epsilon, std::optional<IndexRange> columns) {
  AxisEigenvalues axes(c.rank(), lambda);
  if (columns) {
    check_range(*columns, lambda.size(), "resonance_divide columns");
    axes.back() = lambda.subspan(columns->start, columns->width());
  }
  return resonance_divide(c, axes, epsilon);
}

}  // namespace npfkit
