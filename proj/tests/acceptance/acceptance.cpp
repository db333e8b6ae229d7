// Acceptance checks: one [PASS]/[FAIL] line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "npfkit/batch_planner.hpp"
#include "npfkit/bench.hpp"
#include "npfkit/npf_engine.hpp"
#include "npfkit/reference.hpp"
#include "npfkit/validate.hpp"

using namespace npfkit;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

// Largest peak/budget ratio over every engine run in this binary.
double g_peak_ratio = 0.0;
std::size_t g_engine_runs = 0;

NpfResult engine(const SystemModel& model, const EquilibriumPoint& eq, const ModalBasis& basis,
                 const ModeSubset& modes, const EngineConfig& cfg, const Excitation& exc) {
  NpfResult r = compute_npf(model, eq, basis, modes, cfg, exc);
  for (const auto& s : r.stats) {
    g_peak_ratio = std::max(g_peak_ratio, static_cast<double>(s.peak_workspace_bytes) / s.budget_bytes);
  }
  ++g_engine_runs;
  return r;
}

struct Case {
  PolynomialSystem sys;
  EquilibriumPoint eq;
  ModalBasis basis;
};

Case make_case(PolynomialSystem sys) {
  EquilibriumPoint eq{std::vector<double>(sys.n_states(), 0.0), 0.0};
  ModalBasis basis = decompose(jacobian(sys, eq.x));
  return {std::move(sys), std::move(eq), std::move(basis)};
}

double smallest_denominator(const ModalBasis& b, int max_order) {
  const std::size_t n = b.size();
  double best = std::numeric_limits<double>::infinity();
  for (int m = 2; m <= max_order; ++m) {
    std::vector<std::size_t> a(static_cast<std::size_t>(m), 0);
    for (bool more = true; more;) {
      complex_t sum = 0.0;
      for (std::size_t x : a) sum += b.lambda[x];
      for (std::size_t i = 0; i < n; ++i) best = std::min(best, std::abs(sum - b.lambda[i]));
      more = false;
      for (std::size_t l = a.size(); l-- > 0;) {
        if (++a[l] < n) {
          more = true;
          break;
        }
        a[l] = 0;
      }
    }
  }
  return best;
}

// First seed from `seed` upward whose system has full degree and no near resonances.
Case nonresonant(std::size_t n, unsigned degree, int max_order, std::uint64_t seed) {
  for (;; ++seed) {
    PolynomialSystem sys = gen_random_poly({n, degree, 0.6, seed, 0.2});
    if (sys.max_degree() < degree) continue;
    Case c = make_case(std::move(sys));
    if (smallest_denominator(c.basis, max_order) >= 0.05) return c;
  }
}

EngineConfig config(int order, CorrectionMode mode) {
  EngineConfig cfg;
  cfg.max_order = order;
  cfg.correction = mode;
  return cfg;
}

double order_of(double e1, double e2, double d1, double d2) { return std::log(e1 / e2) / std::log(d1 / d2); }

const std::vector<double> kDeltas = {1e-1, 1e-2, 1e-3, 1e-4};

// ---------------------------------------------------------------------------

Outcome planner_golden() {
  struct Row {
    std::size_t n;
    std::size_t order;
    std::vector<std::size_t> max_extent;
    std::vector<std::size_t> count;
    std::string batches;
    double total_gb;
    double total_half_unit;  // half a unit in the last printed digit
    double per_batch_gb;
  };
  const std::vector<Row> rows = {
      {130, 4, {130, 130, 130, 130, 3}, {1, 1, 1, 1, 44}, "44", 276.63, 0.005, 6.38},
      {351, 3, {351, 351, 351, 24}, {1, 1, 1, 15}, "15", 113.09, 0.005, 7.73},
      {351, 4, {351, 351, 351, 24, 1}, {1, 1, 1, 15, 351}, "5265", 39694, 0.5, 7.73},
      {4251, 2, {4251, 4251, 59}, {1, 1, 73}, "73", 572.35, 0.005, 7.94},
      {4251, 3, {4251, 4251, 59, 1}, {1, 1, 73, 4251}, "310323", 2.4e6, 0.05e6, 7.94},
      {4251, 4, {4251, 4251, 59, 1, 1}, {1, 1, 73, 4251, 4251}, "1319183073", 1.03e10, 0.005e10, 7.94},
  };
  Outcome o;
  const auto t0 = clock_type::now();
  for (const auto& r : rows) {
    const BatchPlan p = plan_batches({r.order + 1, r.n, 8.0, 8});
    const std::string tag = fmt::format("n={} order={}", r.n, r.order);
    o.require(p.max_extent == r.max_extent, tag + " max batch");
    o.require(p.batch_count == r.count, tag + " batch count");
    o.require(to_string(p.batches) == r.batches, tag + " # batches " + to_string(p.batches));
    const double tol_total = std::max(0.05, r.total_half_unit);
    o.require(std::abs(p.total_gib() - r.total_gb) <= tol_total,
              fmt::format("{} total {:.2f} GB vs {} ", tag, p.total_gib(), r.total_gb));
    o.require(std::abs(p.per_batch_gib() - r.per_batch_gb) <= 0.05,
              fmt::format("{} per batch {:.2f} GB vs {}", tag, p.per_batch_gib(), r.per_batch_gb));
  }
  const double secs = seconds_since(t0);
  o.require(secs < 1.0, fmt::format("planner took {:.3f} s", secs));
  if (o.pass) o.detail = fmt::format("6 rows match, {:.4f} s", secs);
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  const std::size_t sizes[] = {4, 6, 8};
  const int orders[] = {2, 3, 4};
  double worst = 0.0;
  const auto t0 = clock_type::now();
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = sizes[trial % 3];
    const int order = orders[(trial / 3) % 3];
    const auto mode = trial % 2 == 0 ? CorrectionMode::raw : CorrectionMode::corrected;
    const Case c = make_case(gen_random_poly({n, static_cast<unsigned>(order), 0.5, 1000u + trial, 0.1}));
    const EngineConfig cfg = config(order, mode);
    const Excitation exc = Excitation::all(0.1);
    const NpfResult v = engine(c.sys, c.eq, c.basis, all_modes(n), cfg, exc);
    const NpfResult t = npf_traditional(c.sys, c.eq, c.basis, all_modes(n), cfg, exc);
    const double e = result_rmse(v, t, 1e-12);
    worst = std::max(worst, e);
    o.require(e <= 1e-8, fmt::format("trial {} n={} order={}: rmse {:.3e}", trial, n, order, e));
  }
  const double secs = seconds_since(t0);
  o.require(secs < 120.0, fmt::format("took {:.1f} s", secs));
  if (o.pass) o.detail = fmt::format("20 systems, worst rmse {:.2e} (<= 1e-8), {:.1f} s", worst, secs);
  return o;
}

Outcome batch_invariance() {
  Outcome o;
  const Case c = make_case(gen_random_poly({6, 4, 0.5, 77, 0.1}));
  const Excitation exc = Excitation::all(0.1);
  const double slab = std::pow(6.0, 4) * 8;  // one index of the last axis
  std::vector<NpfResult> results;
  const auto t0 = clock_type::now();
  for (std::size_t want : {1u, 3u, 6u}) {
    EngineConfig cfg = config(4, CorrectionMode::corrected);
    cfg.memory_limit_gib = slab * (6 / want) / kBytesPerGiB;
    results.push_back(engine(c.sys, c.eq, c.basis, all_modes(6), cfg, exc));
    const std::size_t got = results.back().stats.back().batches;
    o.require(got == want, fmt::format("expected {} batches, got {}", want, got));
  }
  double worst = 0.0;
  for (std::size_t i = 1; i < results.size(); ++i) worst = std::max(worst, result_rmse(results[i], results[0], 0.0));
  o.require(worst <= 1e-12, fmt::format("relative difference {:.3e}", worst));
  const double secs = seconds_since(t0);
  o.require(secs < 30.0, fmt::format("took {:.1f} s", secs));
  if (o.pass) o.detail = fmt::format("1/3/6 batches agree to {:.2e} (<= 1e-12)", worst);
  return o;
}

Outcome linear_reduction() {
  Outcome o;
  const Case c = nonresonant(5, 2, 2, 500);
  std::vector<double> dev;
  for (double d : kDeltas) {
    const NpfResult r = engine(c.sys, c.eq, c.basis, all_modes(5), config(2, CorrectionMode::corrected),
                               Excitation::all(d));
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t k = 0; k < 5; ++k) {
        const complex_t lin = c.basis.phi({k, i}) * c.basis.psi({i, k});
        scale = std::max(scale, std::abs(lin));
        worst = std::max(worst, std::abs(r.linear({i, k}) / d - lin));
      }
    }
    dev.push_back(worst / scale);
  }
  double min_order = INFINITY;
  for (std::size_t j = 1; j < dev.size(); ++j) {
    const double p = order_of(dev[j - 1], dev[j], kDeltas[j - 1], kDeltas[j]);
    min_order = std::min(min_order, p);
    o.require(dev[j] < dev[j - 1], fmt::format("deviation not decreasing at delta={:g}", kDeltas[j]));
    o.require(p >= 1.0 - 1e-6, fmt::format("observed order {:.4f} at delta={:g}", p, kDeltas[j]));
  }
  o.require(dev.back() <= 1e-3, fmt::format("deviation {:.3e} at delta=1e-4", dev.back()));
  if (o.pass) o.detail = fmt::format("order >= {:.3f}, deviation {:.2e} at delta=1e-4", min_order, dev.back());
  return o;
}

Outcome reconstruction() {
  Outcome o;
  const Case c = nonresonant(5, 3, 3, 600);
  std::vector<double> err;
  for (double d : kDeltas) {
    const NpfResult r = engine(c.sys, c.eq, c.basis, all_modes(5), config(3, CorrectionMode::corrected),
                               Excitation::all(d));
    double worst = 0.0;
    for (std::size_t e = 0; e < 5; ++e) {
      complex_t sum = 0.0;
      for (std::size_t i = 0; i < 5; ++i) sum += r.total({i, e});
      worst = std::max(worst, std::abs(sum - d));
    }
    err.push_back(worst);
  }
  double min_order = INFINITY;
  for (std::size_t j = 1; j < err.size(); ++j) {
    const double p = order_of(err[j - 1], err[j], kDeltas[j - 1], kDeltas[j]);
    min_order = std::min(min_order, p);
    o.require(p >= 2.0, fmt::format("observed order {:.3f} at delta={:g}", p, kDeltas[j]));
  }
  if (o.pass) o.detail = fmt::format("observed order >= {:.3f} (>= 2)", min_order);
  return o;
}

Outcome memory_budget() {
  Outcome o;
  const Case c = make_case(gen_random_poly({40, 3, 0.05, 40, 0.1}));
  EngineConfig cfg = config(3, CorrectionMode::raw);
  cfg.memory_limit_gib = std::pow(40.0, 3) * 10 * 8 / kBytesPerGiB;
  const NpfResult r = engine(c.sys, c.eq, c.basis, all_modes(40), cfg, Excitation::all(0.1));
  const OrderStats& s = r.stats.back();
  o.require(s.batches >= 4, fmt::format("only {} batches", s.batches));
  o.require(s.peak_workspace_bytes <= s.budget_bytes,
            fmt::format("peak {} > budget {}", s.peak_workspace_bytes, s.budget_bytes));
  o.require(g_peak_ratio <= 1.0, fmt::format("peak/budget {:.3f} over all runs", g_peak_ratio));
  if (o.pass) {
    o.detail = fmt::format("n=40 order 3 in {} batches; peak/budget <= {:.3f} over {} engine runs", s.batches,
                           g_peak_ratio, g_engine_runs);
  }
  return o;
}

Outcome speed_ordering() {
  Outcome o;
  struct Cell {
    std::size_t n;
    int order;
    double min_ratio;
  };
  std::string summary;
  for (const Cell cell : {Cell{6, 4, 100.0}, Cell{20, 3, 50.0}}) {
    BenchOptions opt;
    opt.t_max_states = 20;
    const BenchRecord t = bench_cell(cell.n, cell.order, "T", opt);
    double vbt = INFINITY;
    for (int rep = 0; rep < 5; ++rep) {
      const BenchRecord v = bench_cell(cell.n, cell.order, "VBT", opt);
      o.require(v.status == "ok", "VBT status " + v.status);
      vbt = std::min(vbt, v.seconds);
    }
    o.require(t.status == "ok", "T status " + t.status);
    const double ratio = t.seconds / vbt;
    o.require(ratio >= cell.min_ratio,
              fmt::format("n={} order {}: T {:.3g} s / VBT {:.3g} s = {:.1f}x < {:.0f}x", cell.n, cell.order,
                          t.seconds, vbt, ratio, cell.min_ratio));
    summary += fmt::format("{}n={} order {}: {:.0f}x (>= {:.0f}x)", summary.empty() ? "" : "; ", cell.n,
                           cell.order, ratio, cell.min_ratio);
  }
  if (o.pass) o.detail = summary;
  return o;
}

Outcome tc_failure() {
  Outcome o;
  // Sparse 130-state system: the full order-4 tensors need 553 GiB.
  const Case c = make_case(gen_random_poly({130, 2, 0.01, 3, 0.1}));
  EngineConfig cfg = config(4, CorrectionMode::raw);
  cfg.memory_limit_gib = 8.0;
  std::string status = "ok";
  try {
    npf_tc_unbatched(c.sys, c.eq, c.basis, all_modes(130), cfg, Excitation::all(0.1));
  } catch (const MemoryLimitError&) {
    status = "memory-fail";
  }
  o.require(status == "memory-fail", "unbatched run returned " + status);
  o.require(to_double(tc_tensor_bytes(130, 4)) > 8.0 * kBytesPerGiB, "system does not exceed 8 GB");
  if (o.pass) {
    o.detail = fmt::format("n=130 order 4 needs {:.1f} GB: memory-fail", to_double(tc_tensor_bytes(130, 4)) / kBytesPerGiB);
  }
  return o;
}

Outcome derivative_providers() {
  Outcome o;
  const SystemDefinition net = three_machine_example();
  const Case poly = make_case(gen_random_poly({5, 4, 0.6, 99, 0.1}));
  struct Target {
    std::string name;
    SystemModel model;
    EquilibriumPoint eq;
  };
  const std::vector<Target> targets = {{"polynomial n=5", poly.sys, {std::vector<double>(5, 0.3), 0.0}},
                                       {"three-machine", net.model, equilibrium_for(net)}};
  std::string summary;
  for (const auto& t : targets) {
    const std::size_t n = state_count(t.model);
    for (int order = 1; order <= 4; ++order) {
      const auto ranges = full_ranges(n, order);
      const auto exact = derivative_batch_exact(t.model, t.eq, order, ranges);
      const auto fd = derivative_batch_fd(t.model, t.eq, order, ranges);
      double worst = 0.0;
      std::size_t checked = 0;
      for (std::size_t i = 0; i < exact.values.size(); ++i) {
        const double ref = exact.values.values()[i];
        if (std::abs(ref) < 1e-6) continue;
        ++checked;
        worst = std::max(worst, std::abs(fd.values.values()[i] - ref) / std::abs(ref));
      }
      const double tol = order <= 2 ? 1e-6 : 1e-3;
      o.require(checked > 0, fmt::format("{} order {}: no entries checked", t.name, order));
      o.require(worst <= tol, fmt::format("{} order {}: {:.3e} > {:.0e}", t.name, order, worst, tol));
      summary += fmt::format("{}{} N={}: {:.1e}", summary.empty() ? "" : ", ", t.name == "three-machine" ? "net" : "poly",
                             order, worst);
    }
  }
  if (o.pass) o.detail = summary;
  return o;
}

Outcome invariant_suites() {
  Outcome o;
  const ValidationReport r = run_validation(ValidationOptions{});
  for (const auto& s : r.suites) o.require(s.passed, s.name + ": " + s.detail);
  if (o.pass) o.detail = fmt::format("{} suites pass with default seeds", r.suites.size());
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  // Memory budget runs after the engine-heavy criteria so its ratio covers them.
  const std::vector<std::pair<int, Criterion>> criteria = {
      {1, {"planner golden values", planner_golden}},
      {2, {"oracle equivalence", oracle_equivalence}},
      {3, {"batch invariance", batch_invariance}},
      {4, {"linear reduction", linear_reduction}},
      {5, {"reconstruction", reconstruction}},
      {7, {"speed ordering", speed_ordering}},
      {8, {"unbatched memory failure", tc_failure}},
      {9, {"derivative providers", derivative_providers}},
      {10, {"invariant suites", invariant_suites}},
      {6, {"memory budget", memory_budget}},
  };
  int failed = 0;
  for (const auto& [id, c] : criteria) {
    Outcome o;
    const auto t0 = clock_type::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += o.pass ? 0 : 1;
    fmt::print("[{}] {:>2} {}: {} ({:.1f} s)\n", o.pass ? "PASS" : "FAIL", id, c.name, o.detail, seconds_since(t0));
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
