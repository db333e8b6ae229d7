#include "npfkit/modal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace npfkit {

namespace {

Eigen::MatrixXcd to_eigen(const ComplexTensor& m) {
  Eigen::MatrixXcd out(m.extent(0), m.extent(1));
  for (std::size_t r = 0; r < m.extent(0); ++r) {
    for (std::size_t c = 0; c < m.extent(1); ++c) out(r, c) = m({r, c});
  }
  return out;
}

ComplexTensor from_eigen(const Eigen::MatrixXcd& m) {
  ComplexTensor out(Shape{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out({std::size_t(r), std::size_t(c)}) = m(r, c);
  }
  return out;
}

}  // namespace

ModalBasis decompose(const RealTensor& a1, double condition_limit) {
  if (a1.rank() != 2 || a1.extent(0) != a1.extent(1)) {
    throw DimensionError("decompose: state matrix must be square");
  }
  const std::size_t n = a1.extent(0);
  Eigen::MatrixXd a(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double v = a1({r, c});
      if (!std::isfinite(v)) throw ArgumentError("decompose: state matrix has non-finite entries");
      a(r, c) = v;
    }
  }

  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, true);
  if (solver.info() != Eigen::Success) throw DiagonalizabilityError("eigen decomposition failed");
  const Eigen::VectorXcd values = solver.eigenvalues();
  const Eigen::MatrixXcd vectors = solver.eigenvectors();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const complex_t lx = values(Eigen::Index(x));
    const complex_t ly = values(Eigen::Index(y));
    if (lx.real() != ly.real()) return lx.real() > ly.real();
    if (lx.imag() != ly.imag()) return lx.imag() < ly.imag();
    return x < y;
  });

  ModalBasis basis;
  basis.lambda.resize(n);
  Eigen::MatrixXcd phi(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index src = Eigen::Index(order[i]);
    basis.lambda[i] = values(src);
    Eigen::VectorXcd v = vectors.col(src);
    Eigen::Index m = 0;
    double best = -1.0;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      if (std::abs(v(k)) > best) {
        best = std::abs(v(k));
        m = k;
      }
    }
    if (!(best > 0.0)) throw DiagonalizabilityError("zero eigenvector returned by solver");
    const complex_t scale = std::conj(v(m)) / (best * best);
    v *= scale;
    v(m) = 1.0;
    phi.col(Eigen::Index(i)) = v;
  }

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(phi);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  basis.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(basis.condition <= condition_limit)) {
    throw DiagonalizabilityError(
        fmt::format("state matrix is not safely diagonalizable: eigenvector condition {:.3e} "
                    "exceeds limit {:.1e}",
                    basis.condition, condition_limit));
  }

  const Eigen::MatrixXcd psi = phi.partialPivLu().inverse();
  basis.phi = from_eigen(phi);
  basis.psi = from_eigen(psi);
  return basis;
}

ComplexTensor linear_pf(const ModalBasis& basis) {
  const std::size_t n = basis.size();
  ComplexTensor p(Shape{n, n});
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) p({k, i}) = basis.phi({k, i}) * basis.psi({i, k});
  }
  return p;
}

double biorthogonality_error(const ModalBasis& basis) {
  const Eigen::MatrixXcd prod = to_eigen(basis.psi) * to_eigen(basis.phi);
  const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(prod.rows(), prod.cols());
  return (prod - eye).cwiseAbs().maxCoeff();
}

double eigen_residual(const RealTensor& a1, const ModalBasis& basis) {
  const std::size_t n = basis.size();
  Eigen::MatrixXcd a(n, n);
  double scale = 1.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      a(r, c) = a1({r, c});
      scale = std::max(scale, std::abs(a1({r, c})));
    }
  }
  const Eigen::MatrixXcd phi = to_eigen(basis.phi);
  Eigen::VectorXcd lam(n);
  for (std::size_t i = 0; i < n; ++i) lam(Eigen::Index(i)) = basis.lambda[i];
  const Eigen::MatrixXcd r = a * phi - phi * lam.asDiagonal();
  return r.cwiseAbs().maxCoeff() / scale;
}

bool ModeSubset::is_all(std::size_t n) const noexcept {
  if (indices.size() != n) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (indices[i] != i) return false;
  }
  return true;
}

ModeSubset all_modes(std::size_t n) {
  ModeSubset s;
  s.indices.resize(n);
  std::iota(s.indices.begin(), s.indices.end(), 0);
  return s;
}

double damping_ratio(complex_t lambda) {
  const double mag = std::abs(lambda);
  return mag > 0.0 ? -lambda.real() / mag : 1.0;
}

double frequency_hz(complex_t lambda) { return std::abs(lambda.imag()) / (2.0 * std::numbers::pi); }

std::size_t conjugate_partner(const ModalBasis& basis, std::size_t i) {
  const complex_t li = basis.lambda.at(i);
  if (li.imag() == 0.0) return i;
  const complex_t target = std::conj(li);
  std::size_t best = i;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < basis.size(); ++j) {
    if (j == i) continue;
    const double d = std::abs(basis.lambda[j] - target);
    if (d < best_dist) {
      best_dist = d;
      best = j;
    }
  }
  return best_dist <= 1e-8 * std::max(1.0, std::abs(li)) ? best : i;
}

ModeSubset select_modes(const ModalBasis& basis, const ModeCriteria& criteria) {
  const std::size_t n = basis.size();
  std::vector<bool> chosen(n, false);
  switch (criteria.kind) {
    case ModeCriteria::Kind::all:
      std::fill(chosen.begin(), chosen.end(), true);
      break;
    case ModeCriteria::Kind::indices:
      for (std::size_t i : criteria.indices) {
        if (i >= n) throw ArgumentError(fmt::format("mode index {} out of range (n = {})", i, n));
        chosen[i] = true;
      }
      break;
    case ModeCriteria::Kind::damping_below:
      for (std::size_t i = 0; i < n; ++i) chosen[i] = damping_ratio(basis.lambda[i]) < criteria.damping_threshold;
      break;
    case ModeCriteria::Kind::frequency_band:
      if (criteria.band_low_hz > criteria.band_high_hz) throw ArgumentError("frequency band is inverted");
      for (std::size_t i = 0; i < n; ++i) {
        const double f = frequency_hz(basis.lambda[i]);
        chosen[i] = f >= criteria.band_low_hz && f <= criteria.band_high_hz;
      }
      break;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (chosen[i]) chosen[conjugate_partner(basis, i)] = true;
  }
  ModeSubset subset;
  for (std::size_t i = 0; i < n; ++i) {
    if (chosen[i]) subset.indices.push_back(i);
  }
  if (subset.indices.empty()) throw SelectionError("mode selection is empty");
  return subset;
}

}  // namespace npfkit
