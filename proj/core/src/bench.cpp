#include "npfkit/bench.hpp"

#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "npfkit/reference.hpp"

namespace npfkit {

std::string result_hash(const NpfResult& result) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const ComplexTensor& t) {
    const auto v = t.values();
    const auto* p = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t i = 0; i < v.size() * sizeof(complex_t); ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  mix(result.linear);
  for (const auto& t : result.higher) mix(t);
  mix(result.total);
  return fmt::format("{:016x}", h);
}

BenchRecord bench_cell(std::size_t n, int order, const std::string& method, const BenchOptions& options) {
  BenchRecord rec;
  rec.system = fmt::format("random-n{}-s{}", n, options.seed);
  rec.n = n;
  rec.order = order;
  rec.method = method;
  if (method != "T" && method != "TC" && method != "VBT") throw ArgumentError("unknown bench method '" + method + "'");

  const PolynomialSystem sys =
      gen_random_poly({n, static_cast<unsigned>(order), options.density, options.seed + n, 0.1});
  const SystemModel model = sys;
  const EquilibriumPoint eq{std::vector<double>(n, 0.0), 0.0};
  EngineConfig cfg;
  cfg.max_order = order;
  cfg.memory_limit_gib = options.limit_gib;
  cfg.workers = options.workers;
  const Excitation exc = Excitation::all(0.1);
  const double full = std::pow(static_cast<double>(n), order + 1);

  const auto start = std::chrono::steady_clock::now();
  try {
    // The basis is part of every method's cost.
    const ModalBasis basis = decompose(jacobian(model, eq.x));
    const ModeSubset modes = all_modes(n);
    const auto budget = std::chrono::duration<double>(options.timeout_seconds);
    NpfResult r;
    if (method == "VBT") {
      cfg.deadline = Deadline(budget);
      r = compute_npf(model, eq, basis, modes, cfg, exc);
      rec.batches = r.stats.back().batches;
      for (const auto& s : r.stats) rec.peak_bytes = std::max(rec.peak_bytes, s.peak_workspace_bytes);
    } else if (method == "TC") {
      cfg.deadline = Deadline(budget);
      r = npf_tc_unbatched(model, eq, basis, modes, cfg, exc);
      rec.peak_bytes = static_cast<std::size_t>(std::min<double>(2.0 * full * 16, 1e19));
    } else {
      ReferenceOptions ro;
      ro.max_states = options.t_max_states;
      ro.deadline = Deadline(budget);
      r = npf_traditional(model, eq, basis, modes, cfg, exc, ro);
      rec.peak_bytes = static_cast<std::size_t>(std::min<double>(full * (8 + 16), 1e19));
    }
    rec.status = "ok";
    rec.hash = result_hash(r);
  } catch (const MemoryLimitError&) {
    rec.status = "memory-fail";
  } catch (const InfeasiblePlanError&) {
    rec.status = "memory-fail";
  } catch (const TimeoutError&) {
    rec.status = "timeout";
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  rec.per_batch_seconds = rec.seconds / static_cast<double>(rec.batches);
  return rec;
}

std::vector<BenchRecord> run_bench(const BenchOptions& options) {
  std::vector<BenchRecord> out;
  for (std::size_t n : options.sizes) {
    for (int order : options.orders) {
      for (const auto& m : options.methods) out.push_back(bench_cell(n, order, m, options));
    }
  }
  return out;
}

std::string bench_csv(const std::vector<BenchRecord>& records) {
  std::string out = "system,n,order,method,seconds,batches,per_batch_seconds,peak_bytes,status,hash\n";
  for (const auto& r : records) {
    out += fmt::format("{},{},{},{},{:.6g},{},{:.6g},{},{},{}\n", r.system, r.n, r.order, r.method, r.seconds,
                       r.batches, r.per_batch_seconds, r.peak_bytes, r.status, r.hash);
  }
  return out;
}

}  // namespace npfkit
