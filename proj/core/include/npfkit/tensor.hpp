#pragma once

// Dense row-major tensors and the handful of multilinear primitives the
// participation-factor pipeline is built from.
//
// Layout: row-major, last index fastest. Every flat index in npfkit (shard
// payloads, mode-tuple encodings, reshapes) follows this convention.

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "npfkit/errors.hpp"

namespace npfkit {

using complex_t = std::complex<double>;
using Shape = std::vector<std::size_t>;

enum class DType : std::uint8_t { real64 = 0, complex128 = 1 };

template <typename T>
struct dtype_of;
template <>
struct dtype_of<double> {
  static constexpr DType value = DType::real64;
};
template <>
struct dtype_of<complex_t> {
  static constexpr DType value = DType::complex128;
};

template <typename A, typename B>
using promote_t =
    std::conditional_t<std::is_same_v<A, double> && std::is_same_v<B, double>, double, complex_t>;

/// Half-open index interval [start, end).
struct IndexRange {
  std::size_t start = 0;
  std::size_t end = 0;

  static constexpr IndexRange full(std::size_t extent) noexcept { return {0, extent}; }

  constexpr std::size_t width() const noexcept { return end - start; }
  constexpr bool contains(std::size_t i) const noexcept { return i >= start && i < end; }
  constexpr bool covers(std::size_t extent) const noexcept { return start == 0 && end == extent; }

  friend constexpr bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Throws ArgumentError unless 0 <= start < end <= extent.
void check_range(const IndexRange& range, std::size_t extent, const char* what);

/// Product of extents. Throws ArgumentError on overflow of std::size_t.
std::size_t element_count(const Shape& shape);

std::vector<std::size_t> row_major_strides(const Shape& shape);

std::string shape_string(const Shape& shape);

template <typename T>
class DenseTensor {
 public:
  using value_type = T;
  static constexpr DType dtype = dtype_of<T>::value;

  DenseTensor() = default;

  explicit DenseTensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(element_count(shape_), T{});
  }

  DenseTensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape();
    if (data_.size() != element_count(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  static DenseTensor filled(Shape shape, T value) {
    DenseTensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const {
    if (axis >= shape_.size()) throw DimensionError("axis out of range");
    return shape_[axis];
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t bytes() const noexcept { return data_.size() * sizeof(T); }

  std::span<const T> values() const noexcept { return data_; }
  std::span<T> values() noexcept { return data_; }

  std::size_t offset(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size()) throw DimensionError("index rank mismatch");
    std::size_t flat = 0;
    for (std::size_t d = 0; d < shape_.size(); ++d) {
      if (index[d] >= shape_[d]) throw DimensionError("index out of range");
      flat = flat * shape_[d] + index[d];
    }
    return flat;
  }

  const T& operator()(std::initializer_list<std::size_t> index) const {
    return data_[offset({index.begin(), index.size()})];
  }
  T& operator()(std::initializer_list<std::size_t> index) {
    return data_[offset({index.begin(), index.size()})];
  }
  const T& at(std::span<const std::size_t> index) const { return data_[offset(index)]; }
  T& at(std::span<const std::size_t> index) { return data_[offset(index)]; }

  /// Reinterprets the row-major data under a new shape of equal element count.
  DenseTensor reshaped(Shape shape) const& { return DenseTensor(std::move(shape), data_); }
  DenseTensor reshaped(Shape shape) && { return DenseTensor(std::move(shape), std::move(data_)); }

  template <typename U>
  DenseTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return DenseTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const DenseTensor& a, const DenseTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void validate_shape() const {
    if (shape_.empty()) throw ArgumentError("tensor rank must be at least 1");
    for (std::size_t e : shape_) {
      if (e == 0) throw ArgumentError("tensor extents must be positive, got " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using RealTensor = DenseTensor<double>;
using ComplexTensor = DenseTensor<complex_t>;

/// Non-owning strided matrix view (row stride in elements, unit column stride).
template <typename T>
struct MatrixView {
  T* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t row_stride = 0;

  T& operator()(std::size_t r, std::size_t c) const { return data[r * row_stride + c]; }
};

template <typename T>
MatrixView<T> matrix_view(DenseTensor<T>& m) {
  if (m.rank() != 2) throw DimensionError("matrix view requires a rank-2 tensor");
  return {m.values().data(), m.extent(0), m.extent(1), m.extent(1)};
}

template <typename T>
MatrixView<const T> matrix_view(const DenseTensor<T>& m) {
  if (m.rank() != 2) throw DimensionError("matrix view requires a rank-2 tensor");
  return {m.values().data(), m.extent(0), m.extent(1), m.extent(1)};
}

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

/// result[..., r, ...] = sum_a t[..., a, ...] * m[a, r].
///
/// With `columns` set, only output columns [columns.start, columns.end) of
/// `m` are produced; the result extent at `axis` is then columns.width().
template <typename A, typename B>
DenseTensor<promote_t<A, B>> contract_axis(const DenseTensor<A>& t, const DenseTensor<B>& m,
                                           std::size_t axis,
                                           std::optional<IndexRange> columns = std::nullopt) {
  using R = promote_t<A, B>;
  if (m.rank() != 2) throw DimensionError("contract_axis: contraction operand must be rank-2");
  if (axis >= t.rank()) throw DimensionError("contract_axis: axis out of range");
  const std::size_t n_in = t.extent(axis);
  if (m.extent(0) != n_in) {
    throw DimensionError("contract_axis: extent " + std::to_string(n_in) + " at axis " +
                         std::to_string(axis) + " does not match matrix rows " +
                         std::to_string(m.extent(0)));
  }
  const IndexRange cols = columns.value_or(IndexRange::full(m.extent(1)));
  check_range(cols, m.extent(1), "contract_axis columns");

  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= t.extent(d);
  std::size_t inner = 1;
  for (std::size_t d = axis + 1; d < t.rank(); ++d) inner *= t.extent(d);
  const std::size_t width = cols.width();
  const std::size_t m_cols = m.extent(1);

  Shape out_shape = t.shape();
  out_shape[axis] = width;
  DenseTensor<R> out(std::move(out_shape));

  const A* src = t.values().data();
  const B* mat = m.values().data();
  R* dst = out.values().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t a = 0; a < n_in; ++a) {
      const A* s = src + (o * n_in + a) * inner;
      const B* mrow = mat + a * m_cols + cols.start;
      for (std::size_t r = 0; r < width; ++r) {
        const B coef = mrow[r];
        if (coef == B{}) continue;
        R* d = dst + (o * width + r) * inner;
        for (std::size_t x = 0; x < inner; ++x) d[x] += R(s[x]) * R(coef);
      }
    }
  }
  return out;
}

/// Axis permutation: result index (i_{perm[0]}, i_{perm[1]}, ...) holds t[i_0, i_1, ...].
/// Equivalently result.shape[d] = t.shape[perm[d]].
template <typename T>
DenseTensor<T> permute(const DenseTensor<T>& t, std::span<const std::size_t> perm) {
  const std::size_t rank = t.rank();
  if (perm.size() != rank) throw ArgumentError("permute: permutation length does not match rank");
  std::vector<bool> seen(rank, false);
  for (std::size_t p : perm) {
    if (p >= rank || seen[p]) throw ArgumentError("permute: not a bijection on axes");
    seen[p] = true;
  }
  Shape out_shape(rank);
  for (std::size_t d = 0; d < rank; ++d) out_shape[d] = t.extent(perm[d]);
  DenseTensor<T> out(out_shape);

  const auto in_strides = row_major_strides(t.shape());
  // Stride in the source for each output axis.
  std::vector<std::size_t> src_stride(rank);
  for (std::size_t d = 0; d < rank; ++d) src_stride[d] = in_strides[perm[d]];

  std::vector<std::size_t> idx(rank, 0);
  const auto src = t.values();
  auto dst = out.values();
  std::size_t src_off = 0;
  for (std::size_t flat = 0; flat < dst.size(); ++flat) {
    dst[flat] = src[src_off];
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out_shape[d]) {
        src_off += src_stride[d];
        break;
      }
      src_off -= (out_shape[d] - 1) * src_stride[d];
      idx[d] = 0;
    }
  }
  return out;
}

template <typename T>
DenseTensor<T> permute(const DenseTensor<T>& t, std::initializer_list<std::size_t> perm) {
  return permute(t, std::span<const std::size_t>(perm.begin(), perm.size()));
}

template <typename T>
DenseTensor<T> hadamard(const DenseTensor<T>& a, const DenseTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("hadamard: shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  DenseTensor<T> out(a.shape());
  const auto x = a.values();
  const auto y = b.values();
  auto z = out.values();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * y[i];
  return out;
}

/// Row products of a rows x cols matrix over all length-`order` row tuples.
///
/// Output row with flat index p encodes the tuple (p_1, ..., p_order) in
/// row-major order (p_order fastest) and equals m[p_1, :] * ... * m[p_order, :]
/// elementwise. `rows` restricts the output to a contiguous slice of tuples.
template <typename T>
DenseTensor<T> row_product(const DenseTensor<T>& m, std::size_t order,
                           std::optional<IndexRange> rows = std::nullopt) {
  if (m.rank() != 2) throw DimensionError("row_product: operand must be rank-2");
  if (order < 1) throw ArgumentError("row_product: order must be at least 1");
  const std::size_t n = m.extent(0);
  const std::size_t cols = m.extent(1);
  const std::size_t total = element_count(Shape(order, n));
  const IndexRange r = rows.value_or(IndexRange::full(total));
  check_range(r, total, "row_product rows");

  DenseTensor<T> out(Shape{r.width(), cols});
  const T* src = m.values().data();
  T* dst = out.values().data();
  std::vector<std::size_t> digit(order, 0);
  {
    std::size_t rem = r.start;
    for (std::size_t l = order; l-- > 0;) {
      digit[l] = rem % n;
      rem /= n;
    }
  }
  for (std::size_t row = 0; row < r.width(); ++row) {
    T* d = dst + row * cols;
    const T* first = src + digit[0] * cols;
    std::copy(first, first + cols, d);
    for (std::size_t l = 1; l < order; ++l) {
      const T* s = src + digit[l] * cols;
      for (std::size_t c = 0; c < cols; ++c) d[c] *= s[c];
    }
    for (std::size_t l = order; l-- > 0;) {
      if (++digit[l] < n) break;
      digit[l] = 0;
    }
  }
  return out;
}

/// Per-axis eigenvalue lists for resonance denominators. Axis 0 holds the
/// subtracted (target) mode; every other axis contributes additively:
///   d(i_0, i_1, ..., i_R) = mu_1[i_1] + ... + mu_R[i_R] - mu_0[i_0].
using AxisEigenvalues = std::vector<std::span<const complex_t>>;

/// Denominator clamp: values with |d| < epsilon become +epsilon.
inline complex_t clamp_denominator(complex_t d, double epsilon) noexcept {
  return std::abs(d) < epsilon ? complex_t(epsilon, 0.0) : d;
}

/// c / clamp(d) with denominators generated on the fly from `axes`.
void resonance_divide_inplace(ComplexTensor& c, const AxisEigenvalues& axes, double epsilon);

ComplexTensor resonance_divide(const ComplexTensor& c, const AxisEigenvalues& axes, double epsilon);

/// Every axis of `c` indexes all of `lambda`, except that with `columns` the
/// last axis covers only lambda[columns.start, columns.end).
ComplexTensor resonance_divide(const ComplexTensor& c, std::span<const complex_t> lambda,
                               double epsilon, std::optional<IndexRange> columns = std::nullopt);

/// out += a * b for strided matrix views.
template <typename T>
void gemm_accumulate(MatrixView<const T> a, MatrixView<const T> b, MatrixView<T> out) {
  if (a.cols != b.rows || out.rows != a.rows || out.cols != b.cols) {
    throw DimensionError("gemm_accumulate: incompatible operand shapes");
  }
  for (std::size_t i = 0; i < a.rows; ++i) {
    T* o = &out(i, 0);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const T aik = a(i, k);
      if (aik == T{}) continue;
      const T* brow = &b(k, 0);
      for (std::size_t j = 0; j < b.cols; ++j) o[j] += aik * brow[j];
    }
  }
}

/// Plain matrix product of two rank-2 tensors.
template <typename T>
DenseTensor<T> matmul(const DenseTensor<T>& a, const DenseTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  DenseTensor<T> out(Shape{a.extent(0), b.extent(1)});
  gemm_accumulate<T>(matrix_view(a), matrix_view(b), matrix_view(out));
  return out;
}

/// Rectangular block of a rank-2 tensor.
template <typename T>
DenseTensor<T> block(const DenseTensor<T>& m, IndexRange rows, IndexRange cols) {
  if (m.rank() != 2) throw DimensionError("block: operand must be rank-2");
  check_range(rows, m.extent(0), "block rows");
  check_range(cols, m.extent(1), "block cols");
  DenseTensor<T> out(Shape{rows.width(), cols.width()});
  for (std::size_t r = 0; r < rows.width(); ++r) {
    for (std::size_t c = 0; c < cols.width(); ++c) {
      out({r, c}) = m({rows.start + r, cols.start + c});
    }
  }
  return out;
}

/// Rows `rows` of `m` in the given order.
template <typename T>
DenseTensor<T> gather_rows(const DenseTensor<T>& m, std::span<const std::size_t> rows) {
  if (m.rank() != 2) throw DimensionError("gather_rows: operand must be rank-2");
  if (rows.empty()) throw ArgumentError("gather_rows: empty row list");
  const std::size_t cols = m.extent(1);
  DenseTensor<T> out(Shape{rows.size(), cols});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m.extent(0)) throw DimensionError("gather_rows: row index out of range");
    std::copy_n(m.values().data() + rows[r] * cols, cols, out.values().data() + r * cols);
  }
  return out;
}

template <typename T>
DenseTensor<T> transpose(const DenseTensor<T>& m) {
  return permute(m, {1, 0});
}

}  // namespace npfkit
