#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "npfkit/system_model.hpp"
#include "npfkit/validate.hpp"

using namespace npfkit;
using namespace npfkit::test;

TEST_CASE("quadratic example derivative tensors") {
  const SystemDefinition def = quadratic_example();
  const EquilibriumPoint eq = equilibrium_for(def);
  const RealTensor a1 = jacobian(def.model, eq.x);
  CHECK(a1({0, 0}) == -1.0);
  CHECK(a1({1, 1}) == -2.0);
  CHECK(a1({0, 1}) == 0.0);

  const auto a2 = derivative_batch_exact(def.model, eq, 2, full_ranges(2, 2));
  CHECK(a2.values.shape() == Shape{2, 2, 2});
  CHECK(a2.values({0, 1, 1}) == 2.0);
  double others = 0.0;
  for (std::size_t i = 0; i < 8; ++i) others += std::abs(a2.values.values()[i]);
  CHECK(others == 2.0);

  const auto a3 = derivative_batch_exact(def.model, eq, 3, full_ranges(2, 3));
  for (double v : a3.values.values()) CHECK(v == 0.0);
}

TEST_CASE("derivative batches restrict to their ranges") {
  const PolynomialSystem sys = gen_random_poly({5, 3, 0.6, 11, 0.1});
  const EquilibriumPoint eq{std::vector<double>(5, 0.0), 0.0};
  const auto full = derivative_batch_exact(sys, eq, 3, full_ranges(5, 3));
  const std::vector<IndexRange> ranges = {{1, 4}, {0, 5}, {2, 3}, {0, 2}};
  const auto part = derivative_batch_exact(sys, eq, 3, ranges);
  CHECK(part.values.shape() == Shape{3, 5, 1, 2});
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t a = 0; a < 5; ++a)
      for (std::size_t c = 0; c < 2; ++c) CHECK(part.values({k, a, 0, c}) == full.values({k + 1, a, 2, c}));
}

TEST_CASE("exact derivatives are symmetric in the input indices") {
  const SystemDefinition def = three_machine_example();
  const EquilibriumPoint eq = equilibrium_for(def);
  const auto a3 = derivative_batch_exact(def.model, eq, 3, full_ranges(6, 3));
  for (std::size_t k = 0; k < 6; ++k)
    for (std::size_t a = 0; a < 6; ++a)
      for (std::size_t b = 0; b < 6; ++b)
        for (std::size_t c = 0; c < 6; ++c) {
          CHECK(a3.values({k, a, b, c}) == a3.values({k, b, a, c}));
          CHECK(a3.values({k, a, b, c}) == a3.values({k, c, b, a}));
        }
}

TEST_CASE("sine network derivatives agree with finite differences") {
  const SystemDefinition def = three_machine_example();
  const EquilibriumPoint eq = equilibrium_for(def);
  CHECK(eq.residual < 1e-9);
  for (int order = 1; order <= 4; ++order) {
    const auto ranges = full_ranges(6, order);
    const auto exact = derivative_batch_exact(def.model, eq, order, ranges);
    const auto fd = derivative_batch_fd(def.model, eq, order, ranges);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < exact.values.size(); ++i) {
      worst = std::max(worst, std::abs(exact.values.values()[i] - fd.values.values()[i]));
      scale = std::max(scale, std::abs(exact.values.values()[i]));
    }
    CAPTURE(order);
    CHECK(worst / scale < (order <= 2 ? 1e-6 : 1e-3));
  }
  CHECK_THROWS_AS(derivative_batch_fd(def.model, eq, 5, full_ranges(6, 5)), ArgumentError);
}

TEST_CASE("jacobian agrees with first-order derivative batch") {
  const PolynomialSystem sys = gen_random_poly({4, 2, 0.7, 3, 0.1});
  const std::vector<double> x = {0.1, -0.2, 0.3, 0.05};
  const EquilibriumPoint pt{x, 0.0};
  const RealTensor j = jacobian(sys, x);
  const auto a1 = derivative_batch_exact(sys, pt, 1, full_ranges(4, 1));
  CHECK(max_abs_diff(j, a1.values) < 1e-14);
}

TEST_CASE("random systems are deterministic and stable at the origin") {
  const RandomPolyOptions opt{6, 3, 0.5, 42, 0.1};
  CHECK(gen_random_poly(opt) == gen_random_poly(opt));
  RandomPolyOptions other = opt;
  other.seed = 43;
  CHECK_FALSE(gen_random_poly(opt) == gen_random_poly(other));
  const PolynomialSystem sys = gen_random_poly(opt);
  CHECK(sys.max_degree() <= 3);
  const std::vector<double> origin(6, 0.0);
  CHECK(field_residual(sys, origin) == 0.0);
}

TEST_CASE("equilibrium solving and verification") {
  const SystemDefinition def = three_machine_example();
  const EquilibriumPoint eq = equilibrium_for(def);
  CHECK(field_residual(def.model, eq.x) < 1e-9);
  CHECK_NOTHROW(verify_equilibrium(def.model, eq.x));
  std::vector<double> off = eq.x;
  off[0] += 0.1;
  CHECK_THROWS_AS(verify_equilibrium(def.model, off), EquilibriumError);
}

TEST_CASE("parse errors carry a document location") {
  auto location_of = [](const std::string& doc) {
    try {
      parse_system(doc);
    } catch (const ParseError& e) {
      return e.location();
    }
    return std::string("no error");
  };
  CHECK(location_of(R"({"type": "polynomial", "n": 2, "terms": [{"k": 5, "c": 1, "x": []}]})") == "/terms/0/k");
  CHECK(location_of(R"({"type": "polynomial", "n": 2, "terms": [{"k": 0, "c": "a", "x": []}]})") == "/terms/0/c");
  CHECK(location_of(R"({"type": "polynomial", "n": 2, "terms": [{"k": 0, "c": 1, "x": [[0, 0]]}]})") ==
        "/terms/0/x/0/1");
  CHECK(location_of(R"({"type": "sine_network", "m": 2, "params": {"inertia": [1], "power": 0, "coupling": 1}})") ==
        "/params/inertia");
  CHECK(location_of(R"({"type": "polynomial", "n": 2)").rfind("byte", 0) == 0);
  CHECK(location_of(R"({"type": "quartic"})") == "/type");
}

TEST_CASE("system documents round-trip through JSON") {
  for (const SystemDefinition& def : {quadratic_example(), three_machine_example(), linear_example()}) {
    const SystemDefinition back = parse_system(system_to_json(def));
    CHECK(back.name == def.name);
    CHECK(state_count(back.model) == state_count(def.model));
    const std::vector<double> x(state_count(def.model), 0.07);
    const auto f0 = eval_field(def.model, x);
    const auto f1 = eval_field(back.model, x);
    for (std::size_t i = 0; i < f0.size(); ++i) CHECK(f1[i] == doctest::Approx(f0[i]).epsilon(1e-15));
  }
}

TEST_CASE("shipped system files load") {
  for (const char* name : {"quadratic_demo.json", "linear_demo.json", "three_machine.json"}) {
    CAPTURE(name);
    const SystemDefinition def = load_system_file(std::string(NPFKIT_DATA_DIR) + "/systems/" + name);
    CHECK(field_residual(def.model, equilibrium_for(def).x) < 1e-9);
  }
  CHECK_THROWS_AS(load_system_file("/nonexistent/system.json"), Error);
}
