#include <doctest.h>

#include "helpers.hpp"
#include "npfkit/reference.hpp"
#include "npfkit/validate.hpp"

using namespace npfkit;
using namespace npfkit::test;

TEST_CASE("traditional method enforces its size guard") {
  const PolynomialSystem sys = gen_random_poly({13, 2, 0.3, 1, 0.1});
  const EquilibriumPoint eq{std::vector<double>(13, 0.0), 0.0};
  const ModalBasis basis = decompose(jacobian(sys, eq.x));
  EngineConfig cfg;
  cfg.max_order = 2;
  CHECK_THROWS_AS(npf_traditional(sys, eq, basis, all_modes(13), cfg, Excitation::all(0.1)), MemoryLimitError);
  ReferenceOptions wide;
  wide.max_states = 13;
  CHECK_NOTHROW(npf_traditional(sys, eq, basis, all_modes(13), cfg, Excitation::all(0.1), wide));
  cfg.max_order = 5;
  CHECK_THROWS_AS(npf_traditional(sys, eq, basis, all_modes(13), cfg, Excitation::all(0.1), wide), ArgumentError);
}

TEST_CASE("unbatched contraction refuses tensors above the limit") {
  CHECK(to_string(tc_tensor_bytes(130, 4)) == "594068800000");
  const PolynomialSystem sys = gen_random_poly({130, 2, 0.01, 1, 0.1});
  const EquilibriumPoint eq{std::vector<double>(130, 0.0), 0.0};
  const ModalBasis basis = decompose(jacobian(sys, eq.x));
  EngineConfig cfg;
  cfg.max_order = 4;
  cfg.memory_limit_gib = 8.0;
  CHECK_THROWS_AS(npf_tc_unbatched(sys, eq, basis, all_modes(130), cfg, Excitation::all(0.1)), MemoryLimitError);
}

TEST_CASE("traditional coefficients match a hand-written second-order sum") {
  const PolynomialSystem sys = gen_random_poly({3, 2, 1.0, 4, 0.1});
  const EquilibriumPoint eq{std::vector<double>(3, 0.0), 0.0};
  const ModalBasis b = decompose(jacobian(sys, eq.x));
  const RealTensor a2 = derivative_batch_exact(sys, eq, 2, full_ranges(3, 2)).values;
  const HTensor h = h_traditional(2, a2, b, 1e-8);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t p = 0; p < 3; ++p)
      for (std::size_t q = 0; q < 3; ++q) {
        complex_t sum = 0.0;
        for (std::size_t k = 0; k < 3; ++k)
          for (std::size_t s = 0; s < 3; ++s)
            for (std::size_t t = 0; t < 3; ++t) sum += b.psi({i, k}) * a2({k, s, t}) * b.phi({s, p}) * b.phi({t, q});
        const complex_t ref = 0.5 * sum / (b.lambda[p] + b.lambda[q] - b.lambda[i]);
        CHECK(std::abs(h.values({i, p, q}) - ref) < 1e-13);
      }
}

TEST_CASE("both references agree with corrected and raw engine runs on the sine network") {
  const SystemDefinition def = three_machine_example();
  const EquilibriumPoint eq = equilibrium_for(def);
  const ModalBasis b = decompose(jacobian(def.model, eq.x));
  for (auto mode : {CorrectionMode::raw, CorrectionMode::corrected}) {
    EngineConfig cfg;
    cfg.max_order = 3;
    cfg.correction = mode;
    const Excitation exc = Excitation::all(0.05);
    const NpfResult t = npf_traditional(def.model, eq, b, all_modes(6), cfg, exc);
    const NpfResult tc = npf_tc_unbatched(def.model, eq, b, all_modes(6), cfg, exc);
    const NpfResult v = compute_npf(def.model, eq, b, all_modes(6), cfg, exc);
    CHECK(result_rmse(tc, t) < 1e-10);
    CHECK(result_rmse(v, t) < 1e-10);
  }
}
