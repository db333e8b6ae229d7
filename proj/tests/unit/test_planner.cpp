#include <doctest.h>

#include <cmath>
#include <set>

#include "npfkit/batch_planner.hpp"

using namespace npfkit;

namespace {

BatchPlan plan(std::size_t order, std::size_t n, double gib = 8.0) {
  return plan_batches({order + 1, n, gib, 8});
}

}  // namespace

TEST_CASE("golden plans") {
  {
    const BatchPlan p = plan(4, 130);
    CHECK(p.max_extent == std::vector<std::size_t>{130, 130, 130, 130, 3});
    CHECK(p.batch_count == std::vector<std::size_t>{1, 1, 1, 1, 44});
    CHECK(to_string(p.batches) == "44");
    CHECK(p.per_batch_gib() == doctest::Approx(6.38).epsilon(0.001));
    CHECK(p.total_gib() == doctest::Approx(276.63).epsilon(0.0001));
  }
  {
    const BatchPlan p = plan(3, 4251);
    CHECK(p.max_extent == std::vector<std::size_t>{4251, 4251, 59, 1});
    CHECK(p.batch_count == std::vector<std::size_t>{1, 1, 73, 4251});
    CHECK(to_string(p.batches) == "310323");
    CHECK(p.per_batch_gib() == doctest::Approx(7.94).epsilon(0.001));
  }
  {
    const BatchPlan p = plan(4, 4251);
    CHECK(p.batch_count == std::vector<std::size_t>{1, 1, 73, 4251, 4251});
    CHECK(to_string(p.batches) == "1319183073");
  }
  {
    const BatchPlan p = plan(4, 351);
    CHECK(p.max_extent == std::vector<std::size_t>{351, 351, 351, 24, 1});
    CHECK(to_string(p.batches) == "5265");
    CHECK(p.total_gib() == doctest::Approx(39694.08).epsilon(1e-6));
  }
  CHECK(to_string(plan(2, 6).batches) == "1");
}

TEST_CASE("plans respect the limit and tile the index space") {
  for (std::size_t n : {3u, 5u, 7u, 10u}) {
    for (std::size_t order : {2u, 3u, 4u}) {
      const double full = std::pow(static_cast<double>(n), order + 1) * 8;
      for (double frac : {1.5, 0.5, 0.13, 0.02}) {
        const double gib = full * frac / kBytesPerGiB;
        BatchPlan p;
        try {
          p = plan(order, n, gib);
        } catch (const InfeasiblePlanError&) {
          continue;
        }
        CHECK(p.per_batch_bytes <= p.input.limit_bytes());
        const auto all = enumerate_ranges(p);
        CHECK(all.size() == static_cast<std::size_t>(p.batches));
        wide_uint volume = 0;
        std::set<std::vector<std::size_t>> starts;
        for (const auto& r : all) {
          CHECK(batch_bytes(r, 8) <= p.per_batch_bytes);
          volume += batch_bytes(r, 8);
          std::vector<std::size_t> s;
          for (const auto& x : r) s.push_back(x.start);
          starts.insert(s);
        }
        CHECK(volume == p.total_bytes);
        CHECK(starts.size() == all.size());
        CHECK(batch_ranges(p, p.batches - 1) == all.back());
      }
    }
  }
}

TEST_CASE("infeasible and invalid plans") {
  CHECK_THROWS_AS(plan_batches({3, 10, 1e-9, 8}), InfeasiblePlanError);
  CHECK_THROWS_AS(plan_batches({0, 10, 8.0, 8}), ArgumentError);
  CHECK_THROWS_AS(plan_batches({3, 0, 8.0, 8}), ArgumentError);
  CHECK_THROWS_AS(plan_batches({3, 10, -1.0, 8}), ArgumentError);
  const BatchPlan p = plan(2, 6);
  CHECK_THROWS_AS(batch_ranges(p, 1), ArgumentError);
  CHECK_THROWS_AS(enumerate_ranges(plan(4, 4251), 1000), ArgumentError);
}
