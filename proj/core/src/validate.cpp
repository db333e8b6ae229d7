#include "npfkit/validate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "npfkit/reference.hpp"
#include "npfkit/shard_io.hpp"

namespace npfkit {

double relative_rmse(std::span<const complex_t> a, std::span<const complex_t> ref, double floor) {
  if (a.size() != ref.size()) throw DimensionError("relative_rmse: size mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(ref[i]) < floor) continue;
    num += std::norm(a[i] - ref[i]);
    den += std::norm(ref[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

double result_rmse(const NpfResult& a, const NpfResult& ref, double floor) {
  if (a.max_order != ref.max_order || a.modes != ref.modes || a.states != ref.states) {
    throw DimensionError("results are not comparable");
  }
  std::vector<complex_t> x, y;
  for (int m = 1; m <= a.max_order; ++m) {
    const auto u = a.order(m).values();
    const auto v = ref.order(m).values();
    x.insert(x.end(), u.begin(), u.end());
    y.insert(y.end(), v.begin(), v.end());
  }
  return relative_rmse(x, y, floor);
}

double linear_deviation(const NpfResult& r, const ModalBasis& basis) {
  const ComplexTensor lin = linear_pf(basis);
  double scale = 0.0;
  double worst = 0.0;
  for (std::size_t s = 0; s < r.modes.size(); ++s) {
    for (std::size_t e = 0; e < r.states.size(); ++e) {
      const complex_t ref = lin({r.states[e], r.modes[s]});
      scale = std::max(scale, std::abs(ref));
      worst = std::max(worst, std::abs(r.linear({s, e}) / r.delta - ref));
    }
  }
  return scale > 0.0 ? worst / scale : worst;
}

double reconstruction_error(const NpfResult& r) {
  double worst = 0.0;
  for (std::size_t e = 0; e < r.states.size(); ++e) {
    complex_t sum = 0.0;
    for (std::size_t s = 0; s < r.modes.size(); ++s) sum += r.total({s, e});
    worst = std::max(worst, std::abs(sum - r.delta));
  }
  return worst;
}

double observed_order(double e1, double e2, double d1, double d2) {
  return std::log(e1 / e2) / std::log(d1 / d2);
}

SystemDefinition three_machine_example() {
  SineNetwork net;
  net.machines = 3;
  net.inertia = {0.25, 0.12, 0.08};
  net.damping = {0.10, 0.08, 0.06};
  net.power = {0.6, 0.9, 0.5};
  net.voltage = {1.04, 1.025, 1.025};
  net.coupling = {{0.0, 1.6, 1.2}, {1.6, 0.0, 1.4}, {1.2, 1.4, 0.0}};
  net.infinite_bus = {2.2, 1.2, 1.0};
  net.validate();
  return {"three-machine", net, std::nullopt};
}

SystemDefinition quadratic_example() {
  PolynomialSystem sys(2, {{0, -1.0, {{0, 1}}}, {0, 1.0, {{1, 2}}}, {1, -2.0, {{1, 1}}}});
  return {"quadratic-demo", sys, std::vector<double>{0.0, 0.0}};
}

SystemDefinition linear_example() {
  PolynomialSystem sys(3, {{0, -0.5, {{0, 1}}},
                           {0, 2.0, {{1, 1}}},
                           {1, -2.0, {{0, 1}}},
                           {1, -0.5, {{1, 1}}},
                           {2, 0.3, {{0, 1}}},
                           {2, -1.5, {{2, 1}}}});
  return {"linear-demo", sys, std::vector<double>{0.0, 0.0, 0.0}};
}

bool ValidationReport::passed() const {
  return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed; });
}

std::string format_report(const ValidationReport& report) {
  std::string out;
  for (const auto& s : report.suites) {
    out += fmt::format("[{}] {:<20} worst={:.3e} tol={:.1e} checks={}\n", s.passed ? "PASS" : "FAIL", s.name,
                       s.worst, s.tolerance, s.checks);
    if (!s.detail.empty()) out += fmt::format("       {}\n", s.detail);
  }
  out += report.passed() ? "validation passed\n" : "validation FAILED\n";
  return out;
}

namespace {

struct Case {
  SystemModel model;
  EquilibriumPoint eq;
  ModalBasis basis;
};

Case make_case(SystemModel model) {
  const std::size_t n = state_count(model);
  EquilibriumPoint eq = verify_equilibrium(model, std::vector<double>(n, 0.0));
  ModalBasis basis = decompose(jacobian(model, eq.x));
  return {std::move(model), std::move(eq), std::move(basis)};
}

double min_denominator(const ModalBasis& basis, int max_order) {
  const std::size_t n = basis.size();
  double best = std::numeric_limits<double>::infinity();
  for (int m = 2; m <= max_order; ++m) {
    std::vector<std::size_t> a(static_cast<std::size_t>(m), 0);
    while (true) {
      complex_t sum = 0.0;
      for (std::size_t x : a) sum += basis.lambda[x];
      for (std::size_t i = 0; i < n; ++i) best = std::min(best, std::abs(sum - basis.lambda[i]));
      std::size_t l = a.size();
      while (l > 0 && ++a[l - 1] == n) a[--l] = 0;
      if (l == 0) break;
    }
  }
  return best;
}

// Random polynomial system of full degree whose resonance denominators up to max_order all
// stay at or above `gap`; successive seeds are tried until one qualifies.
Case nonresonant_case(std::size_t n, unsigned degree, int max_order, std::uint64_t seed, double gap = 0.05) {
  for (std::uint64_t s = seed;; ++s) {
    PolynomialSystem sys = gen_random_poly({n, degree, 0.6, s, 0.2});
    if (sys.max_degree() < degree) continue;
    Case c = make_case(std::move(sys));
    if (min_denominator(c.basis, max_order) >= gap) return c;
  }
}

class Suite {
 public:
  Suite(std::string name, double tolerance) {
    r_.name = std::move(name);
    r_.tolerance = tolerance;
  }

  // Records a metric that must not exceed the tolerance.
  void metric(double value, const std::string& what) {
    ++r_.checks;
    r_.worst = std::max(r_.worst, std::isnan(value) ? std::numeric_limits<double>::infinity() : value);
    if (!(value <= r_.tolerance)) fail(fmt::format("{}: {:.3e} > {:.1e}", what, value, r_.tolerance));
  }

  void require(bool ok, const std::string& what) {
    ++r_.checks;
    if (!ok) fail(what);
  }

  void fail(const std::string& what) {
    if (r_.passed) r_.detail = what;
    r_.passed = false;
  }

  SuiteResult result() && { return std::move(r_); }

 private:
  SuiteResult r_;
};

template <typename F>
void guarded(Suite& suite, const std::string& what, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    suite.fail(fmt::format("{}: {}", what, e.what()));
  }
}

struct Context {
  const ValidationOptions& opt;
  std::vector<OrderStats> stats;

  EngineConfig config(int order, CorrectionMode mode) const {
    EngineConfig cfg;
    cfg.max_order = order;
    cfg.correction = mode;
    cfg.inject_sign_fault = opt.inject_fault;
    return cfg;
  }

  NpfResult vbt(const Case& c, const EngineConfig& cfg, const Excitation& exc) {
    NpfResult r = compute_npf(c.model, c.eq, c.basis, all_modes(c.basis.size()), cfg, exc);
    stats.insert(stats.end(), r.stats.begin(), r.stats.end());
    return r;
  }

  int max_order() const { return *std::max_element(opt.orders.begin(), opt.orders.end()); }
};

SuiteResult oracle_suite(Context& ctx) {
  Suite suite("oracle-equivalence", 1e-8);
  std::uint64_t seed = ctx.opt.seed;
  for (std::size_t n : ctx.opt.sizes) {
    for (int order : ctx.opt.orders) {
      for (std::size_t trial = 0; trial < ctx.opt.trials; ++trial, ++seed) {
        guarded(suite, fmt::format("n={} order={} seed={}", n, order, seed), [&] {
          const Case c = make_case(gen_random_poly({n, static_cast<unsigned>(order), 0.5, seed, 0.1}));
          const ModeSubset modes = all_modes(n);
          for (auto mode : {CorrectionMode::raw, CorrectionMode::corrected}) {
            const EngineConfig cfg = ctx.config(order, mode);
            const Excitation exc = Excitation::all(0.5);
            const NpfResult v = ctx.vbt(c, cfg, exc);
            const std::string tag = fmt::format("n={} order={} seed={} {}", n, order, seed, to_string(mode));
            if (n <= ReferenceOptions{}.max_states) {
              suite.metric(result_rmse(v, npf_traditional(c.model, c.eq, c.basis, modes, cfg, exc)), tag + " vs T");
            }
            if (tc_tensor_bytes(n, order) <= PlannerInput{1, 1, cfg.memory_limit_gib, 8}.limit_bytes()) {
              suite.metric(result_rmse(v, npf_tc_unbatched(c.model, c.eq, c.basis, modes, cfg, exc)), tag + " vs TC");
            }
          }
        });
      }
    }
  }
  return std::move(suite).result();
}

SuiteResult batch_suite(Context& ctx) {
  Suite suite("batch-invariance", 1e-12);
  const int order = ctx.max_order();
  std::uint64_t seed = ctx.opt.seed + 1000;
  for (std::size_t n : ctx.opt.sizes) {
    guarded(suite, fmt::format("n={} order={}", n, order), [&] {
      const Case c = make_case(gen_random_poly({n, static_cast<unsigned>(order), 0.5, seed++, 0.1}));
      const EngineConfig base = ctx.config(order, CorrectionMode::corrected);
      const NpfResult ref = ctx.vbt(c, base, Excitation::all(0.3));
      const double slab = std::pow(static_cast<double>(n), order) * base.element_bytes;
      // Limits giving ~3 and n batches along the last axis, then a split of
      // the second-to-last axis as well.
      std::vector<std::pair<double, std::size_t>> limits = {{slab * std::ceil(n / 3.0), 1}, {slab, 1}};
      if (n > 1) limits.push_back({slab / n * 2, 1});
      limits.push_back({slab, std::min<std::size_t>(3, n)});
      for (const auto& [bytes, workers] : limits) {
        EngineConfig cfg = base;
        cfg.workers = workers;
        cfg.memory_limit_gib = (bytes * workers + 0.5) / kBytesPerGiB;
        const NpfResult r = ctx.vbt(c, cfg, Excitation::all(0.3));
        suite.metric(result_rmse(r, ref, 0.0),
                     fmt::format("n={} {} batches x {} workers", n, r.stats.back().batches, workers));
      }
    });
  }
  return std::move(suite).result();
}

const std::vector<double> kDeltas = {1e-1, 1e-2, 1e-3, 1e-4};

SuiteResult linear_suite(Context& ctx) {
  Suite suite("linear-reduction", 1e-10);
  std::uint64_t seed = ctx.opt.seed + 2000;
  for (std::size_t n : ctx.opt.sizes) {
    guarded(suite, fmt::format("linear n={}", n), [&] {
      const Case c = make_case(gen_random_poly({n, 1, 0.5, seed++, 0.1}));
      const NpfResult r = ctx.vbt(c, ctx.config(ctx.max_order(), CorrectionMode::raw), Excitation::all(1.0));
      suite.metric(linear_deviation(r, c.basis), fmt::format("linear n={} P1 vs linear PF", n));
      double higher = 0.0;
      for (const auto& p : r.higher) {
        for (complex_t v : p.values()) higher = std::max(higher, std::abs(v));
      }
      suite.require(higher == 0.0, fmt::format("linear n={} higher orders not exactly zero ({:.3e})", n, higher));
    });
  }
  // Corrected-mode sweep: deviation from linear PFs falls at least linearly.
  // A quadratic system makes the deviation exactly linear in delta, so the
  // observed order sits at 1 up to rounding.
  for (std::size_t n : ctx.opt.sizes) {
    guarded(suite, fmt::format("sweep n={}", n), [&] {
      const Case c = nonresonant_case(n, 2, 2, seed++);
      std::vector<double> dev;
      for (double d : kDeltas) {
        dev.push_back(linear_deviation(ctx.vbt(c, ctx.config(2, CorrectionMode::corrected), Excitation::all(d)), c.basis));
      }
      for (std::size_t j = 1; j < dev.size(); ++j) {
        const double p = observed_order(dev[j - 1], dev[j], kDeltas[j - 1], kDeltas[j]);
        suite.require(dev[j] < dev[j - 1] && p >= 1.0 - 1e-6,
                      fmt::format("sweep n={} delta={:g}: deviation {:.3e} order {:.6f}", n, kDeltas[j], dev[j], p));
      }
      suite.require(dev.back() <= 1e-3, fmt::format("sweep n={} deviation {:.3e} at delta=1e-4", n, dev.back()));
    });
  }
  return std::move(suite).result();
}

SuiteResult reconstruction_suite(Context& ctx) {
  Suite suite("reconstruction", 0.0);
  std::uint64_t seed = ctx.opt.seed + 3000;
  double worst_order = std::numeric_limits<double>::infinity();
  for (std::size_t n : ctx.opt.sizes) {
    guarded(suite, fmt::format("n={}", n), [&] {
      const Case c = nonresonant_case(n, 3, 3, seed++);
      std::vector<double> err;
      for (double d : kDeltas) {
        err.push_back(reconstruction_error(ctx.vbt(c, ctx.config(3, CorrectionMode::corrected), Excitation::all(d))));
      }
      for (std::size_t j = 1; j < err.size(); ++j) {
        const double p = observed_order(err[j - 1], err[j], kDeltas[j - 1], kDeltas[j]);
        worst_order = std::min(worst_order, p);
        suite.require(p >= 2.0, fmt::format("n={} delta={:g}: error {:.3e} order {:.3f}", n, kDeltas[j], err[j], p));
      }
    });
  }
  SuiteResult r = std::move(suite).result();
  r.detail = r.passed ? fmt::format("worst observed order {:.3f} (required >= 2)", worst_order) : r.detail;
  return r;
}

// Plan-only shard set for partition checks.
class PlanRanges final : public ShardSet {
 public:
  PlanRanges(BatchPlan plan) : plan_(std::move(plan)) {}
  int order() const override { return static_cast<int>(plan_.dims.size()) - 1; }
  std::size_t n_states() const override { return plan_.input.n_states; }
  std::size_t count() const override { return static_cast<std::size_t>(plan_.batches); }
  std::vector<IndexRange> ranges(std::size_t b) const override { return batch_ranges(plan_, b); }
  DerivativeTensorBatch load(std::size_t) const override { throw ArgumentError("plan-only shard set"); }

 private:
  BatchPlan plan_;
};

double symmetry_defect(const ComplexTensor& t) {
  double scale = 0.0;
  for (complex_t v : t.values()) scale = std::max(scale, std::abs(v));
  double worst = 0.0;
  for (std::size_t l = 1; l + 1 < t.rank(); ++l) {
    std::vector<std::size_t> perm(t.rank());
    std::iota(perm.begin(), perm.end(), 0);
    std::swap(perm[l], perm[l + 1]);
    const ComplexTensor p = permute(t, perm);
    for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, std::abs(p.values()[i] - t.values()[i]));
  }
  return scale > 0.0 ? worst / scale : worst;
}

SuiteResult invariant_suite(Context& ctx) {
  Suite suite("invariants", 1e-10);
  std::vector<std::pair<std::string, Case>> cases;
  std::uint64_t seed = ctx.opt.seed + 4000;
  for (std::size_t n : ctx.opt.sizes) {
    guarded(suite, fmt::format("setup n={}", n), [&] {
      cases.emplace_back(fmt::format("poly n={}", n), make_case(gen_random_poly({n, 3, 0.5, seed++, 0.1})));
    });
  }
  guarded(suite, "setup three-machine", [&] {
    const SystemDefinition def = three_machine_example();
    const EquilibriumPoint eq = equilibrium_for(def);
    cases.push_back({"three-machine", {def.model, eq, decompose(jacobian(def.model, eq.x))}});
  });

  for (const auto& [name, c] : cases) {
    guarded(suite, name, [&] {
      const std::size_t n = c.basis.size();
      suite.metric(biorthogonality_error(c.basis), name + " biorthogonality");
      const ComplexTensor lin = linear_pf(c.basis);
      double col = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        complex_t sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) sum += lin({k, i});
        col = std::max(col, std::abs(sum - 1.0));
      }
      suite.metric(col, name + " linear PF column sums");
      for (int m = 2; m <= 3; ++m) {
        const auto ranges = full_ranges(n, m);
        const auto exact = derivative_batch_exact(c.model, c.eq, m, ranges).values.cast<complex_t>();
        suite.metric(symmetry_defect(exact), fmt::format("{} order-{} derivative symmetry", name, m));
        const auto fd = derivative_batch_fd(c.model, c.eq, m, ranges).values.cast<complex_t>();
        suite.metric(symmetry_defect(fd), fmt::format("{} order-{} FD derivative symmetry", name, m));
        EngineConfig cfg;
        cfg.max_order = m;
        const GeneratedShards shards(c.model, c.eq, m, engine_plan(n, m, cfg));
        const HTensor h = export_h_tensor(shards, c.basis, all_modes(n), cfg);
        suite.metric(symmetry_defect(h.values), fmt::format("{} order-{} h-tensor symmetry", name, m));
      }

      // Shard round trip through an uneven plan.
      const int m = 3;
      PlannerInput in{static_cast<std::size_t>(m) + 1, n, 0.0, 8};
      in.limit_gib = (std::pow(static_cast<double>(n), m - 1) * 8 * 2 + 0.5) / kBytesPerGiB;
      const GeneratedShards shards(c.model, c.eq, m, plan_batches(in));
      for (std::size_t b = 0; b < shards.count(); ++b) {
        const DerivativeTensorBatch batch = shards.load(b);
        const std::string bytes = encode_shard(batch);
        const std::span<const unsigned char> view(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
        const DerivativeTensorBatch back = decode_shard(view);
        suite.require(back.values == batch.values && back.ranges == batch.ranges && back.ordinal == batch.ordinal &&
                          back.total == batch.total && encode_shard(back) == bytes,
                      fmt::format("{} shard {} round trip not bit-exact", name, b));
        std::string corrupt = bytes;
        corrupt[bytes.size() - 9] ^= 0x10;
        bool detected = false;
        try {
          decode_shard({reinterpret_cast<const unsigned char*>(corrupt.data()), corrupt.size()});
        } catch (const ChecksumError&) {
          detected = true;
        }
        suite.require(detected, fmt::format("{} shard {} corruption not detected", name, b));
      }
    });
  }

  // Planner: every plan partitions the tensor exactly and each batch fits.
  std::mt19937_64 rng(ctx.opt.seed);
  for (int trial = 0; trial < 200; ++trial) {
    guarded(suite, fmt::format("planner trial {}", trial), [&] {
      const std::size_t rank = 1 + rng() % 5;
      const std::size_t n = 1 + rng() % 9;
      const unsigned width = std::array<unsigned, 3>{4, 8, 16}[rng() % 3];
      const double total = std::pow(static_cast<double>(n), static_cast<double>(rank)) * width;
      const double frac = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      const double bytes = std::max<double>(width, std::floor(std::pow(total, frac)));
      const BatchPlan plan = plan_batches({rank, n, (bytes + 0.5) / kBytesPerGiB, width});
      suite.require(plan.per_batch_bytes <= plan.input.limit_bytes(),
                    fmt::format("planner rank={} n={} batch exceeds limit", rank, n));
      wide_uint sum = 0;
      for (const auto& r : enumerate_ranges(plan)) {
        const wide_uint b = batch_bytes(r, width);
        suite.require(b <= plan.per_batch_bytes, "batch larger than reported per-batch size");
        sum += b;
      }
      suite.require(sum == plan.total_bytes, fmt::format("planner rank={} n={} volume mismatch", rank, n));
      verify_partition(PlanRanges(plan));
    });
  }
  return std::move(suite).result();
}

SuiteResult memory_suite(Context& ctx) {
  Suite suite("memory-budget", 1.0);
  guarded(suite, "n=40 order=3", [&] {
    const Case c = make_case(gen_random_poly({40, 3, 0.2, ctx.opt.seed + 5000, 0.1}));
    EngineConfig cfg = ctx.config(3, CorrectionMode::raw);
    cfg.memory_limit_gib = (40.0 * 40 * 40 * 10 * 8 + 0.5) / kBytesPerGiB;
    const NpfResult r = compute_npf(c.model, c.eq, c.basis, all_modes(40), cfg, Excitation::all(0.1));
    ctx.stats.insert(ctx.stats.end(), r.stats.begin(), r.stats.end());
    suite.require(r.stats.back().batches >= 4, fmt::format("n=40 plan has only {} batches", r.stats.back().batches));
  });
  for (const auto& s : ctx.stats) {
    const double ratio = s.budget_bytes > 0 ? double(s.peak_workspace_bytes) / double(s.budget_bytes) : 0.0;
    suite.metric(ratio, fmt::format("order-{} run with {} batches: peak/budget", s.order, s.batches));
  }
  return std::move(suite).result();
}

}  // namespace

ValidationReport run_validation(const ValidationOptions& options) {
  if (options.sizes.empty() || options.orders.empty()) throw ArgumentError("validation needs sizes and orders");
  for (int m : options.orders) {
    if (m < 2 || m > kMaxTraditionalOrder) throw ArgumentError("validation orders must lie in 2..4");
  }
  for (std::size_t n : options.sizes) {
    if (n < 1) throw ArgumentError("validation sizes must be positive");
  }
  Context ctx{options, {}};
  ValidationReport report;
  report.suites.push_back(oracle_suite(ctx));
  report.suites.push_back(batch_suite(ctx));
  report.suites.push_back(linear_suite(ctx));
  report.suites.push_back(reconstruction_suite(ctx));
  report.suites.push_back(invariant_suite(ctx));
  report.suites.push_back(memory_suite(ctx));
  return report;
}

}  // namespace npfkit
