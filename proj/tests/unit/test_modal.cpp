#include <doctest.h>

#include "helpers.hpp"
#include "npfkit/modal.hpp"
#include "npfkit/system_model.hpp"
#include "npfkit/validate.hpp"

using namespace npfkit;
using namespace npfkit::test;

namespace {

ModalBasis three_machine_basis() {
  const SystemDefinition def = three_machine_example();
  return decompose(jacobian(def.model, equilibrium_for(def).x));
}

}  // namespace

TEST_CASE("decomposition is biorthogonal and diagonalizes the state matrix") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PolynomialSystem sys = gen_random_poly({7, 2, 0.5, seed, 0.1});
    const RealTensor a1 = jacobian(sys, std::vector<double>(7, 0.0));
    const ModalBasis b = decompose(a1);
    CHECK(biorthogonality_error(b) < 1e-12);
    CHECK(eigen_residual(a1, b) < 1e-12);
    for (const auto& l : b.lambda) CHECK(l.real() <= -0.1 + 1e-9);
  }
}

TEST_CASE("modes are sorted and eigenvectors normalized") {
  const ModalBasis b = three_machine_basis();
  for (std::size_t i = 1; i < b.size(); ++i) {
    const bool ordered = b.lambda[i - 1].real() > b.lambda[i].real() + 1e-12 ||
                         (std::abs(b.lambda[i - 1].real() - b.lambda[i].real()) <= 1e-12 &&
                          b.lambda[i - 1].imag() <= b.lambda[i].imag());
    CHECK(ordered);
  }
  for (std::size_t c = 0; c < b.size(); ++c) {
    double best = 0.0;
    complex_t top = 0.0;
    for (std::size_t r = 0; r < b.size(); ++r) {
      if (std::abs(b.phi({r, c})) > best) {
        best = std::abs(b.phi({r, c}));
        top = b.phi({r, c});
      }
    }
    CHECK(best == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(top.imag()) < 1e-12);
    CHECK(top.real() > 0.0);
  }
}

TEST_CASE("linear participation factor columns sum to one") {
  const ModalBasis b = three_machine_basis();
  const ComplexTensor p = linear_pf(b);
  for (std::size_t i = 0; i < b.size(); ++i) {
    complex_t sum = 0.0;
    for (std::size_t k = 0; k < b.size(); ++k) sum += p({k, i});
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("complex modes come in conjugate pairs") {
  const ModalBasis b = three_machine_basis();
  for (std::size_t i = 0; i < b.size(); ++i) {
    const std::size_t j = conjugate_partner(b, i);
    CHECK(std::abs(b.lambda[j] - std::conj(b.lambda[i])) < 1e-10);
    CHECK(conjugate_partner(b, j) == i);
  }
}

TEST_CASE("defective matrices are refused") {
  const RealTensor jordan(Shape{2, 2}, {-1.0, 1.0, 0.0, -1.0});
  CHECK_THROWS_AS(decompose(jordan), DiagonalizabilityError);
  const RealTensor near(Shape{2, 2}, {-1.0, 1.0, 1e-24, -1.0});
  CHECK_THROWS_AS(decompose(near), DiagonalizabilityError);
  CHECK_THROWS_AS(decompose(RealTensor(Shape{2, 3})), DimensionError);
}

TEST_CASE("mode selection") {
  const ModalBasis b = three_machine_basis();
  CHECK(select_modes(b, ModeCriteria::all()).is_all(b.size()));

  // Selecting one mode of a complex pair pulls in its partner.
  std::size_t complex_mode = b.size();
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (std::abs(b.lambda[i].imag()) > 1e-9) {
      complex_mode = i;
      break;
    }
  }
  REQUIRE(complex_mode < b.size());
  const ModeSubset pair = select_modes(b, ModeCriteria::of({complex_mode}));
  CHECK(pair.size() == 2);
  CHECK(std::find(pair.indices.begin(), pair.indices.end(), conjugate_partner(b, complex_mode)) !=
        pair.indices.end());

  const ModeSubset damped = select_modes(b, ModeCriteria::damping(1.01));
  CHECK(damped.is_all(b.size()));
  CHECK_THROWS_AS(select_modes(b, ModeCriteria::damping(0.0)), SelectionError);
  CHECK_THROWS_AS(select_modes(b, ModeCriteria::band(1e6, 2e6)), SelectionError);
  CHECK_THROWS_AS(select_modes(b, ModeCriteria::band(2.0, 1.0)), ArgumentError);
  CHECK_THROWS_AS(select_modes(b, ModeCriteria::of({99})), ArgumentError);

  const ModeSubset band = select_modes(b, ModeCriteria::band(0.0, 1e6));
  for (std::size_t i : band.indices) CHECK(frequency_hz(b.lambda[i]) <= 1e6);
  CHECK(damping_ratio({0.0, 0.0}) == 1.0);
  CHECK(damping_ratio({-1.0, 0.0}) == doctest::Approx(1.0));
}
