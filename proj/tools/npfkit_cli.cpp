#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "npfkit/bench.hpp"
#include "npfkit/reference.hpp"
#include "npfkit/results_io.hpp"
#include "npfkit/shard_io.hpp"
#include "npfkit/validate.hpp"

namespace {

using namespace npfkit;

constexpr int kExitError = 1;
constexpr int kExitParse = 2;
constexpr int kExitMemory = 3;
constexpr int kExitValidation = 4;

double default_limit_gib() {
  if (const char* env = std::getenv("NPFKIT_LIMIT_GB")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end == env || *end != '\0' || !(v > 0.0)) {
      throw ArgumentError(fmt::format("NPFKIT_LIMIT_GB must be a positive number, got '{}'", env));
    }
    return v;
  }
  const long pages = sysconf(_SC_PHYS_PAGES);
  const long page = sysconf(_SC_PAGE_SIZE);
  if (pages <= 0 || page <= 0) return 8.0;
  return std::min(8.0, 0.4 * static_cast<double>(pages) * static_cast<double>(page) / kBytesPerGiB);
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
    } catch (const std::exception&) {
      throw ArgumentError(fmt::format("{}: '{}' is not a non-negative integer", what, item));
    }
  }
  if (out.empty()) throw ArgumentError(fmt::format("{}: empty list", what));
  return out;
}

// all | 0,2,5 | damping:<ratio> | band:<lo>-<hi>
ModeCriteria parse_modes(const std::string& text) {
  if (text == "all") return ModeCriteria::all();
  if (text.rfind("damping:", 0) == 0) return ModeCriteria::damping(std::stod(text.substr(8)));
  if (text.rfind("band:", 0) == 0) {
    const std::string body = text.substr(5);
    const auto dash = body.find('-');
    if (dash == std::string::npos) throw ArgumentError("band selection must look like band:LO-HI");
    return ModeCriteria::band(std::stod(body.substr(0, dash)), std::stod(body.substr(dash + 1)));
  }
  return ModeCriteria::of(parse_list<std::size_t>(text, "--modes"));
}

std::string gib_text(double gib) { return fmt::format("{:.2f} GB", gib); }

int cmd_plan(std::size_t states, int order, double limit, unsigned dtype_bytes, const std::string& format) {
  PlannerInput in{static_cast<std::size_t>(order) + 1, states, limit, dtype_bytes};
  const BatchPlan plan = plan_batches(in);
  if (format == "json") {
    nlohmann::json j = {{"states", states},
                        {"order", order},
                        {"dimensions", plan.dims.size()},
                        {"limit_gb", limit},
                        {"dtype_bytes", dtype_bytes},
                        {"total_bytes", to_string(plan.total_bytes)},
                        {"total_gb", plan.total_gib()},
                        {"max_batch", plan.max_extent},
                        {"batch_count", plan.batch_count},
                        {"batches", to_string(plan.batches)},
                        {"per_batch_bytes", to_string(plan.per_batch_bytes)},
                        {"per_batch_gb", plan.per_batch_gib()}};
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  fmt::print("States      {}\n", states);
  fmt::print("Order       {}\n", order);
  fmt::print("Limit       {}\n", gib_text(limit));
  fmt::print("Total Size  {}\n", gib_text(plan.total_gib()));
  fmt::print("Max Batch   [{}]\n", fmt::join(plan.max_extent, ", "));
  fmt::print("Batch Count [{}]\n", fmt::join(plan.batch_count, ", "));
  fmt::print("# Batches   {}\n", to_string(plan.batches));
  fmt::print("Per Batch   {}\n", gib_text(plan.per_batch_gib()));
  return 0;
}

struct ComputeArgs {
  std::string system;
  int order = 2;
  double delta = 1.0;
  double epsilon = kDefaultEpsilon;
  std::string modes = "all";
  std::string excite = "all";
  std::string correction = "raw";
  double limit = 0.0;
  std::size_t workers = 1;
  std::string method = "vbt";
  std::string shards;
  std::string out;
  std::string format;
  std::string provider = "exact";
  bool normalize = false;
  bool no_meta = false;
};

int cmd_compute(const ComputeArgs& a) {
  const SystemDefinition def = load_system_file(a.system);
  const EquilibriumPoint eq = equilibrium_for(def);
  const ModalBasis basis = decompose(jacobian(def.model, eq.x));
  const ModeSubset modes = select_modes(basis, parse_modes(a.modes));
  const std::size_t n = basis.size();

  EngineConfig cfg;
  cfg.max_order = a.order;
  cfg.epsilon = a.epsilon;
  cfg.correction = parse_correction_mode(a.correction);
  cfg.memory_limit_gib = a.limit;
  cfg.workers = a.workers;
  if (a.provider == "fd") {
    cfg.provider = DerivativeProvider::finite_difference;
  } else if (a.provider != "exact") {
    throw ArgumentError("--provider must be 'exact' or 'fd'");
  }
  const Excitation exc = a.excite == "all" ? Excitation::all(a.delta)
                                           : Excitation::single(parse_list<std::size_t>(a.excite, "--excite").at(0), a.delta);

  NpfResult result;
  if (a.method == "vbt") {
    result = a.shards.empty() ? compute_npf(def.model, eq, basis, modes, cfg, exc)
                              : compute_npf(disk_catalog(a.shards), basis, modes, cfg, exc);
  } else if (a.method == "tc") {
    result = npf_tc_unbatched(def.model, eq, basis, modes, cfg, exc);
  } else if (a.method == "t") {
    result = npf_traditional(def.model, eq, basis, modes, cfg, exc);
  } else {
    throw ArgumentError("--method must be vbt, tc or t");
  }

  const ResultContext ctx{def.name, n, !a.no_meta};
  std::string format = a.format;
  if (format.empty()) format = std::filesystem::path(a.out).extension() == ".csv" ? "csv" : "json";
  const ResultFormat f = parse_result_format(format);
  if (a.out.empty() || a.out == "-") {
    if (f == ResultFormat::json) {
      std::cout << results_to_json(result, ctx);
    } else {
      auto rows = result_rows(result);
      if (a.normalize) normalize_rows(rows);
      std::cout << rows_to_csv(rows);
    }
  } else {
    write_results(result, a.out, f, ctx, a.normalize);
  }
  return 0;
}

int cmd_shards(const std::string& system, int order, double limit, const std::string& dir, const std::string& provider) {
  const SystemDefinition def = load_system_file(system);
  const EquilibriumPoint eq = equilibrium_for(def);
  EngineConfig cfg;
  cfg.max_order = order;
  cfg.memory_limit_gib = limit;
  cfg.validate();
  const DerivativeProvider p = provider == "fd" ? DerivativeProvider::finite_difference : DerivativeProvider::exact;
  for (int m = 2; m <= order; ++m) {
    const BatchPlan plan = engine_plan(state_count(def.model), m, cfg);
    const std::size_t count = save_shards(def.model, eq, m, plan, dir, p);
    fmt::print("order {}: {} shard file(s), {} per batch\n", m, count, gib_text(plan.per_batch_gib()));
  }
  return 0;
}

int cmd_validate(ValidationOptions opt, const std::string& sizes, const std::string& orders) {
  if (!sizes.empty()) opt.sizes = parse_list<std::size_t>(sizes, "--sizes");
  if (!orders.empty()) {
    opt.orders.clear();
    for (std::size_t m : parse_list<std::size_t>(orders, "--orders")) opt.orders.push_back(static_cast<int>(m));
  }
  const ValidationReport report = run_validation(opt);
  std::cout << format_report(report);
  return report.passed() ? 0 : kExitValidation;
}

int cmd_bench(BenchOptions opt, const std::string& sizes, const std::string& orders, const std::string& methods,
              const std::string& out) {
  if (!sizes.empty()) opt.sizes = parse_list<std::size_t>(sizes, "--sizes");
  if (!orders.empty()) {
    opt.orders.clear();
    for (std::size_t m : parse_list<std::size_t>(orders, "--orders")) opt.orders.push_back(static_cast<int>(m));
  }
  if (!methods.empty()) {
    opt.methods.clear();
    std::stringstream in(methods);
    std::string m;
    while (std::getline(in, m, ',')) {
      for (auto& c : m) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      if (m != "T" && m != "TC" && m != "VBT") throw ArgumentError("--methods accepts T, TC and VBT");
      opt.methods.push_back(m);
    }
  }
  std::vector<BenchRecord> records;
  for (std::size_t n : opt.sizes) {
    for (int order : opt.orders) {
      for (const auto& m : opt.methods) {
        records.push_back(bench_cell(n, order, m, opt));
        const auto& r = records.back();
        fmt::print(stderr, "n={} order={} {:<3} {:<11} {:.4g} s\n", r.n, r.order, r.method, r.status, r.seconds);
      }
    }
  }
  const std::string csv = bench_csv(records);
  if (out.empty() || out == "-") {
    std::cout << csv;
  } else {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError(fmt::format("cannot write {}", out));
    f << csv;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"npfkit: batched high-order nonlinear participation factors"};
  app.require_subcommand(1);

  double limit = 0.0;
  auto resolve_limit = [&] { return limit > 0.0 ? limit : default_limit_gib(); };

  auto* plan = app.add_subcommand("plan", "Batch plan for an order-N derivative tensor");
  std::size_t plan_states = 0;
  int plan_order = 2;
  unsigned dtype_bytes = 8;
  std::string plan_format = "text";
  plan->add_option("--states", plan_states, "Number of states")->required()->check(CLI::PositiveNumber);
  plan->add_option("--order", plan_order, "Derivative order N (tensor rank N+1)")->required()->check(CLI::Range(1, 64));
  plan->add_option("--limit-gb", limit, "Per-batch memory limit in GB (GiB)");
  plan->add_option("--dtype-bytes", dtype_bytes, "Element width")->check(CLI::IsMember({4, 8, 16}));
  plan->add_option("--format", plan_format, "text or json")->check(CLI::IsMember({"text", "json"}));

  auto* compute = app.add_subcommand("compute", "Compute NPFs for a system file");
  ComputeArgs ca;
  compute->add_option("--system", ca.system, "System definition JSON")->required();
  compute->add_option("--order", ca.order, "Maximum order N")->check(CLI::Range(2, 16));
  compute->add_option("--delta", ca.delta, "Excitation magnitude");
  compute->add_option("--epsilon", ca.epsilon, "Resonance clamp");
  compute->add_option("--modes", ca.modes, "all | i,j,... | damping:RATIO | band:LO-HI");
  compute->add_option("--excite", ca.excite, "Excited state index or 'all'");
  compute->add_option("--correction", ca.correction, "raw or corrected")->check(CLI::IsMember({"raw", "corrected"}));
  compute->add_option("--limit-gb", limit, "Memory limit in GB (GiB)");
  compute->add_option("--workers", ca.workers, "Engine worker threads")->check(CLI::PositiveNumber);
  compute->add_option("--method", ca.method, "vbt, tc or t")->check(CLI::IsMember({"vbt", "tc", "t"}));
  compute->add_option("--shards", ca.shards, "Read derivative shards from this directory");
  compute->add_option("--out", ca.out, "Output file (default stdout)");
  compute->add_option("--format", ca.format, "json or csv (default from extension)")->check(CLI::IsMember({"json", "csv"}));
  compute->add_option("--provider", ca.provider, "exact or fd")->check(CLI::IsMember({"exact", "fd"}));
  compute->add_flag("--normalize", ca.normalize, "Scale each mode's largest magnitude to 1 (CSV)");
  compute->add_flag("--no-meta", ca.no_meta, "Omit the metadata block");

  auto* shards = app.add_subcommand("shards", "Generate and save derivative shards");
  std::string sh_system, sh_out, sh_provider = "exact";
  int sh_order = 2;
  shards->add_option("--system", sh_system, "System definition JSON")->required();
  shards->add_option("--order", sh_order, "Maximum order N")->check(CLI::Range(2, 16));
  shards->add_option("--limit-gb", limit, "Memory limit in GB (GiB)");
  shards->add_option("--out", sh_out, "Output directory")->required();
  shards->add_option("--provider", sh_provider, "exact or fd")->check(CLI::IsMember({"exact", "fd"}));

  auto* validate = app.add_subcommand("validate", "Run the validation suites");
  ValidationOptions vo;
  std::string v_sizes, v_orders;
  validate->add_option("--seed", vo.seed, "Base seed");
  validate->add_option("--sizes", v_sizes, "Comma-separated state counts");
  validate->add_option("--orders", v_orders, "Comma-separated orders (2..4)");
  validate->add_option("--trials", vo.trials, "Systems per (size, order)")->check(CLI::PositiveNumber);
  validate->add_flag("--inject-fault", vo.inject_fault)->group("");

  auto* bench = app.add_subcommand("bench", "Time T, TC and VBT on seeded random systems");
  BenchOptions bo;
  std::string b_sizes, b_orders, b_methods, b_out;
  bench->add_option("--sizes", b_sizes, "Comma-separated state counts");
  bench->add_option("--orders", b_orders, "Comma-separated orders");
  bench->add_option("--methods", b_methods, "Comma-separated subset of T,TC,VBT");
  bench->add_option("--timeout", bo.timeout_seconds, "Seconds per cell");
  bench->add_option("--limit-gb", limit, "Memory limit in GB (GiB)");
  bench->add_option("--seed", bo.seed, "System seed");
  bench->add_option("--t-max-states", bo.t_max_states, "Size guard for T");
  bench->add_option("--out", b_out, "CSV output (default stdout)");

  auto* convert = app.add_subcommand("convert", "Convert a JSON results file to CSV");
  std::string c_in, c_out;
  bool c_norm = false;
  convert->add_option("--in", c_in, "Results JSON")->required();
  convert->add_option("--out", c_out, "CSV output")->required();
  convert->add_flag("--normalize", c_norm, "Scale each mode's largest magnitude to 1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitParse;
  }

  try {
    if (*plan) return cmd_plan(plan_states, plan_order, resolve_limit(), dtype_bytes, plan_format);
    if (*compute) {
      ca.limit = resolve_limit();
      return cmd_compute(ca);
    }
    if (*shards) return cmd_shards(sh_system, sh_order, resolve_limit(), sh_out, sh_provider);
    if (*validate) return cmd_validate(vo, v_sizes, v_orders);
    if (*bench) {
      bo.limit_gib = resolve_limit();
      return cmd_bench(bo, b_sizes, b_orders, b_methods, b_out);
    }
    if (*convert) {
      convert_results(c_in, c_out, c_norm);
      return 0;
    }
  } catch (const ParseError& e) {
    fmt::print(stderr, "npfkit: parse error: {}\n", e.what());
    return kExitParse;
  } catch (const MemoryLimitError& e) {
    fmt::print(stderr, "npfkit: memory limit: {}\n", e.what());
    return kExitMemory;
  } catch (const InfeasiblePlanError& e) {
    fmt::print(stderr, "npfkit: infeasible plan: {}\n", e.what());
    return kExitMemory;
  } catch (const InternalMemoryError& e) {
    fmt::print(stderr, "npfkit: workspace budget: {}\n", e.what());
    return kExitMemory;
  } catch (const std::exception& e) {
    fmt::print(stderr, "npfkit: error: {}\n", e.what());
    return kExitError;
  }
  return kExitError;
}
