#include <doctest.h>

#include "npfkit/bench.hpp"
#include "npfkit/validate.hpp"

using namespace npfkit;

TEST_CASE("validation passes on single-state systems") {
  ValidationOptions opt;
  opt.sizes = {1};
  opt.orders = {2, 3};
  opt.trials = 1;
  const ValidationReport r = run_validation(opt);
  CHECK(r.passed());
  CHECK(format_report(r).find("FAIL") == std::string::npos);
}

TEST_CASE("an injected sign fault fails validation") {
  ValidationOptions opt;
  opt.sizes = {3};
  opt.orders = {2};
  opt.trials = 1;
  opt.inject_fault = true;
  const ValidationReport r = run_validation(opt);
  CHECK_FALSE(r.passed());
  bool oracle_failed = false;
  for (const auto& s : r.suites) oracle_failed |= s.name == "oracle-equivalence" && !s.passed;
  CHECK(oracle_failed);
}

TEST_CASE("validation options are checked") {
  ValidationOptions opt;
  opt.orders = {5};
  CHECK_THROWS_AS(run_validation(opt), ArgumentError);
}

TEST_CASE("reconstruction metrics") {
  CHECK(observed_order(1e-2, 1e-4, 1e-1, 1e-2) == doctest::Approx(2.0));
  const std::vector<complex_t> ref = {1.0, 2.0, 1e-14};
  const std::vector<complex_t> a = {1.0, 2.0, 5.0};
  CHECK(relative_rmse(a, ref) == 0.0);
  const std::vector<complex_t> b = {1.1, 2.0, 0.0};
  CHECK(relative_rmse(b, ref) == doctest::Approx(std::sqrt(0.01 / 5.0)));
}

TEST_CASE("bench cells report status and stable hashes") {
  BenchOptions opt;
  opt.t_max_states = 6;
  const BenchRecord v1 = bench_cell(5, 2, "VBT", opt);
  const BenchRecord v2 = bench_cell(5, 2, "VBT", opt);
  const BenchRecord t = bench_cell(5, 2, "T", opt);
  const BenchRecord tc = bench_cell(5, 2, "TC", opt);
  CHECK(v1.status == "ok");
  CHECK(v1.hash.size() == 16);
  CHECK(v1.hash == v2.hash);
  CHECK(t.status == "ok");
  CHECK(tc.status == "ok");

  const BenchRecord guarded = bench_cell(7, 2, "T", opt);
  CHECK(guarded.status == "memory-fail");
  CHECK(guarded.hash.empty());

  BenchOptions tight = opt;
  tight.limit_gib = 1e-6;
  CHECK(bench_cell(20, 3, "TC", tight).status == "memory-fail");

  BenchOptions quick = opt;
  quick.timeout_seconds = 1e-6;
  quick.t_max_states = 20;
  CHECK(bench_cell(10, 3, "T", quick).status == "timeout");

  CHECK_THROWS_AS(bench_cell(4, 2, "X", opt), ArgumentError);
  const std::string csv = bench_csv({v1, guarded});
  CHECK(csv.rfind("system,n,order,method,seconds,batches,per_batch_seconds,peak_bytes,status,hash\n", 0) == 0);
  CHECK(csv.find(",memory-fail,\n") != std::string::npos);
}
