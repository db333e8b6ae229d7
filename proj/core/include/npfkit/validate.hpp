#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "npfkit/npf_engine.hpp"

namespace npfkit {

/// sqrt(sum |a - ref|^2 / sum |ref|^2) over entries with |ref| >= floor.
/// Zero when no entry passes the floor.
double relative_rmse(std::span<const complex_t> a, std::span<const complex_t> ref, double floor = 1e-12);

/// relative_rmse over every order block (P1..PN) of two results.
double result_rmse(const NpfResult& a, const NpfResult& ref, double floor = 1e-12);

/// Largest |P1[i, k] / delta - linear_pf[k, i]| relative to the largest linear PF.
double linear_deviation(const NpfResult& r, const ModalBasis& basis);

/// Largest |sum_i total[i, k] - delta| over excited states k. Requires all modes.
double reconstruction_error(const NpfResult& r);

/// log(e1 / e2) / log(d1 / d2).
double observed_order(double e1, double e2, double d1, double d2);

/// Built-in three-machine swing network (6 states).
SystemDefinition three_machine_example();

/// Quadratic two-state system dx0 = -x0 + x1^2, dx1 = -2 x1.
SystemDefinition quadratic_example();

/// Linear three-state system with distinct real and complex modes.
SystemDefinition linear_example();

struct ValidationOptions {
  std::uint64_t seed = 7;
  std::vector<std::size_t> sizes = {4, 6};
  std::vector<int> orders = {2, 3, 4};
  std::size_t trials = 2;
  bool inject_fault = false;  // flips the sign of every engine higher-order term
};

struct SuiteResult {
  std::string name;
  bool passed = true;
  double worst = 0.0;      // worst observed metric
  double tolerance = 0.0;  // bound on `worst` (or on the failing quantity, see detail)
  std::size_t checks = 0;
  std::string detail;      // first failure, if any
};

struct ValidationReport {
  std::vector<SuiteResult> suites;
  bool passed() const;
};

/// Runs the oracle, batch-invariance, linear-reduction, reconstruction,
/// invariant and memory-budget suites.
ValidationReport run_validation(const ValidationOptions& options);

std::string format_report(const ValidationReport& report);

}  // namespace npfkit
