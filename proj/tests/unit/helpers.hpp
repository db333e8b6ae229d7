#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include "npfkit/tensor.hpp"

namespace npfkit::test {

template <typename T>
double max_abs_diff(const DenseTensor<T>& a, const DenseTensor<T>& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

inline RealTensor random_real(Shape shape, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RealTensor t(std::move(shape));
  for (auto& v : t.values()) v = u(rng);
  return t;
}

inline ComplexTensor random_complex(Shape shape, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ComplexTensor t(std::move(shape));
  for (auto& v : t.values()) v = {u(rng), u(rng)};
  return t;
}

}  // namespace npfkit::test
