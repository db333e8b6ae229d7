#pragma once

#include <cstddef>
#include <vector>

#include "npfkit/tensor.hpp"

namespace npfkit {

inline constexpr double kDefaultConditionLimit = 1e10;

/// Biorthogonal eigenbasis of a state matrix.
///
/// phi holds right eigenvectors as columns, psi left eigenvectors as rows,
/// with psi = inverse(phi). Each column of phi has unit max-norm and its
/// largest-magnitude entry is real and positive. Modes are ordered by
/// descending real part, then ascending imaginary part.
struct ModalBasis {
  ComplexTensor phi;
  ComplexTensor psi;
  std::vector<complex_t> lambda;
  double condition = 1.0;

  std::size_t size() const noexcept { return lambda.size(); }
};

/// Throws DiagonalizabilityError when the eigenvector matrix is singular or
/// its 2-norm condition number exceeds `condition_limit` (the Jordan case is
/// refused rather than approximated).
ModalBasis decompose(const RealTensor& a1, double condition_limit = kDefaultConditionLimit);

/// P[k, i] = phi[k, i] * psi[i, k] (state x mode). Columns sum to one.
ComplexTensor linear_pf(const ModalBasis& basis);

/// Max-norm of psi * phi - I.
double biorthogonality_error(const ModalBasis& basis);

/// Max-norm of a1 * phi - phi * diag(lambda), relative to max(1, |a1|).
double eigen_residual(const RealTensor& a1, const ModalBasis& basis);

struct ModeSubset {
  std::vector<std::size_t> indices;

  std::size_t size() const noexcept { return indices.size(); }
  bool is_all(std::size_t n) const noexcept;
};

ModeSubset all_modes(std::size_t n);

struct ModeCriteria {
  enum class Kind { all, indices, damping_below, frequency_band };

  Kind kind = Kind::all;
  std::vector<std::size_t> indices;
  double damping_threshold = 0.0;  // select modes with damping ratio < threshold
  double band_low_hz = 0.0;
  double band_high_hz = 0.0;

  static ModeCriteria all() { return {}; }
  static ModeCriteria of(std::vector<std::size_t> idx) { return {Kind::indices, std::move(idx), 0, 0, 0}; }
  static ModeCriteria damping(double threshold) { return {Kind::damping_below, {}, threshold, 0, 0}; }
  static ModeCriteria band(double lo, double hi) { return {Kind::frequency_band, {}, 0, lo, hi}; }
};

/// -Re(lambda) / |lambda|; 1 for lambda = 0.
double damping_ratio(complex_t lambda);

/// Oscillation frequency |Im(lambda)| / (2 pi) in Hz.
double frequency_hz(complex_t lambda);

/// Sorted unique subset, closed under complex conjugation. Throws
/// SelectionError when nothing is selected and ArgumentError on malformed
/// criteria.
ModeSubset select_modes(const ModalBasis& basis, const ModeCriteria& criteria);

/// Index of the conjugate partner of mode i, or i itself for real modes.
std::size_t conjugate_partner(const ModalBasis& basis, std::size_t i);

}  // namespace npfkit
