#include "npfkit/npf_engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include <fmt/format.h>

#include "npfkit/workspace.hpp"

namespace npfkit {

std::string to_string(CorrectionMode mode) {
  return mode == CorrectionMode::raw ? "raw" : "corrected";
}

CorrectionMode parse_correction_mode(const std::string& text) {
  if (text == "raw") return CorrectionMode::raw;
  if (text == "corrected") return CorrectionMode::corrected;
  throw ArgumentError("correction mode must be 'raw' or 'corrected', got '" + text + "'");
}

void EngineConfig::validate() const {
  if (max_order < 2) throw ArgumentError("max order must be at least 2");
  if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
  if (!(memory_limit_gib > 0.0)) throw ArgumentError("memory limit must be positive");
  if (workers < 1) throw ArgumentError("worker count must be at least 1");
  if (element_bytes != 4 && element_bytes != 8 && element_bytes != 16) {
    throw ArgumentError("element width must be 4, 8 or 16 bytes");
  }
}

std::vector<std::size_t> Excitation::states(std::size_t n) const {
  if (!(delta > 0.0)) throw ArgumentError("excitation magnitude must be positive");
  if (kind == Kind::single) {
    if (state >= n) throw ArgumentError(fmt::format("excited state {} out of range (n = {})", state, n));
    return {state};
  }
  std::vector<std::size_t> all(n);
  for (std::size_t k = 0; k < n; ++k) all[k] = k;
  return all;
}

const ComplexTensor& NpfResult::order(int m) const {
  if (m == 1) return linear;
  if (m < 2 || static_cast<std::size_t>(m - 2) >= higher.size()) {
    throw ArgumentError(fmt::format("result has no order-{} block", m));
  }
  return higher[static_cast<std::size_t>(m - 2)];
}

// --- shard sources -------------------------------------------------------------

GeneratedShards::GeneratedShards(const SystemModel& model, const EquilibriumPoint& eq, int order,
                                 BatchPlan plan, DerivativeProvider provider)
    : model_(&model), eq_(&eq), order_(order), plan_(std::move(plan)), provider_(provider) {
  if (plan_.dims.size() != static_cast<std::size_t>(order) + 1) {
    throw ArgumentError("plan rank does not match derivative order");
  }
}

std::vector<IndexRange> GeneratedShards::ranges(std::size_t ordinal) const {
  return batch_ranges(plan_, ordinal);
}

DerivativeTensorBatch GeneratedShards::load(std::size_t ordinal) const {
  const auto r = ranges(ordinal);
  DerivativeTensorBatch batch = provider_ == DerivativeProvider::exact
                                    ? derivative_batch_exact(*model_, *eq_, order_, r)
                                    : derivative_batch_fd(*model_, *eq_, order_, r);
  batch.ordinal = ordinal;
  batch.total = count();
  return batch;
}

BatchPlan engine_plan(std::size_t n_states, int order, const EngineConfig& cfg) {
  PlannerInput input;
  input.n_dim = static_cast<std::size_t>(order) + 1;
  input.n_states = n_states;
  input.limit_gib = cfg.memory_limit_gib / static_cast<double>(cfg.workers);
  input.element_bytes = cfg.element_bytes;
  return plan_batches(input);
}

ShardCatalog generated_catalog(const SystemModel& model, const EquilibriumPoint& eq,
                               const EngineConfig& cfg) {
  return [&model, &eq, cfg](int order) -> std::unique_ptr<ShardSet> {
    return std::make_unique<GeneratedShards>(model, eq, order,
                                             engine_plan(state_count(model), order, cfg), cfg.provider);
  };
}

void verify_partition(const ShardSet& shards) {
  const std::size_t n = shards.n_states();
  const std::size_t rank = static_cast<std::size_t>(shards.order()) + 1;
  std::vector<std::vector<IndexRange>> all;
  all.reserve(shards.count());
  wide_uint volume = 0;
  for (std::size_t b = 0; b < shards.count(); ++b) {
    auto r = shards.ranges(b);
    if (r.size() != rank) throw CoverageError(fmt::format("shard {} has rank {}, expected {}", b, r.size(), rank));
    for (const auto& x : r) {
      if (x.start >= x.end || x.end > n) throw CoverageError(fmt::format("shard {} has an invalid range", b));
    }
    volume += batch_bytes(r, 1);
    all.push_back(std::move(r));
  }
  wide_uint expected = 1;
  for (std::size_t d = 0; d < rank; ++d) expected *= n;
  if (volume != expected) {
    throw CoverageError(fmt::format("shards cover {} entries, tensor has {}", to_string(volume),
                                    to_string(expected)));
  }
  // Equal volume plus pairwise disjointness gives an exact partition.
  if (all.size() > 4096) return;
  for (std::size_t a = 0; a < all.size(); ++a) {
    for (std::size_t b = a + 1; b < all.size(); ++b) {
      bool overlap = true;
      for (std::size_t d = 0; d < rank && overlap; ++d) {
        overlap = all[a][d].start < all[b][d].end && all[b][d].start < all[a][d].end;
      }
      if (overlap) throw CoverageError(fmt::format("shards {} and {} overlap", a, b));
    }
  }
}

// --- streaming contraction ----------------------------------------------------------

namespace {

double factorial(int m) {
  double f = 1.0;
  for (int i = 2; i <= m; ++i) f *= i;
  return f;
}

// Axis classification of one shard. Axis 0 is the output state; axes
// 1..M-1 are either fully covered (contracted with phi up front) or partial
// ("raw", resolved one mode at a time); the last axis is always resolved in
// column chunks.
struct ShardGeometry {
  std::size_t n = 0;
  std::size_t order = 0;
  std::vector<IndexRange> ranges;
  std::vector<std::size_t> full_mid;
  std::vector<std::size_t> raw_mid;
  std::size_t trailing = 1;  // elements per leading index
  std::size_t prefix = 1;    // product of middle extents after contraction

  ShardGeometry(std::size_t n_states, std::span<const IndexRange> r)
      : n(n_states), order(r.size() - 1), ranges(r.begin(), r.end()) {
    for (std::size_t l = 1; l < r.size(); ++l) trailing *= r[l].width();
    for (std::size_t l = 1; l + 1 < r.size(); ++l) {
      if (r[l].covers(n)) {
        full_mid.push_back(l);
        prefix *= n;
      } else {
        raw_mid.push_back(l);
      }
    }
  }
};

// Peak transient bytes of process_shard for leading chunk `ci` and column
// chunk `cw`. Mirrors the reservation sequence in process_shard.
std::size_t predicted_peak(const ShardGeometry& g, std::size_t ci, std::size_t cw, std::size_t n_exc) {
  const std::size_t t = ci * g.trailing;
  std::size_t peak = g.full_mid.empty() ? t : 2 * t;
  std::size_t s = t;
  if (!g.raw_mid.empty()) {
    std::size_t prev = t;
    bool prev_is_t = true;
    for (std::size_t l : g.raw_mid) {
      const std::size_t next = prev / g.ranges[l].width();
      peak = std::max(peak, t + (prev_is_t ? 0 : prev) + next);
      prev = next;
      prev_is_t = false;
    }
    s = prev;
  }
  const std::size_t sc = ci * g.prefix * cw;
  const std::size_t z = cw * n_exc;
  if (g.raw_mid.empty()) {
    peak = std::max(peak, t + sc);
    peak = std::max(peak, cw == g.n ? sc + z : t + sc + z);
  } else {
    peak = std::max(peak, t + s + sc + z);
  }
  return peak * sizeof(complex_t);
}

struct ChunkChoice {
  std::size_t leading = 1;
  std::size_t columns = 1;
};

ChunkChoice choose_chunks(const ShardGeometry& g, std::size_t n_sel, std::size_t n_exc,
                          std::size_t budget, std::size_t requested_leading) {
  const std::size_t start = requested_leading == 0 ? n_sel : std::min(requested_leading, n_sel);
  for (std::size_t ci = start; ci >= 1; --ci) {
    for (std::size_t cw = g.n; cw >= 1; --cw) {
      if (predicted_peak(g, ci, cw, n_exc) <= budget) return {ci, cw};
    }
  }
  throw InternalMemoryError(fmt::format(
      "no chunking of shard fits the {}-byte workspace budget (minimum {} bytes)", budget,
      predicted_peak(g, 1, 1, n_exc)));
}

// result[j, rest] = sum_k values[k, rest] * lead[k, j]. Derivative shards are
// mostly zeros, so only their nonzero entries are visited.
ComplexTensor contract_leading(const RealTensor& values, const ComplexTensor& lead) {
  const std::size_t w0 = values.extent(0);
  const std::size_t ci = lead.extent(1);
  const std::size_t inner = values.size() / w0;
  Shape shape = values.shape();
  shape[0] = ci;
  ComplexTensor out(std::move(shape));
  const double* src = values.values().data();
  const complex_t* coef = lead.values().data();
  complex_t* dst = out.values().data();
  for (std::size_t k = 0; k < w0; ++k) {
    for (std::size_t x = 0; x < inner; ++x) {
      const double v = src[k * inner + x];
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < ci; ++j) dst[j * inner + x] += coef[k * ci + j] * v;
    }
  }
  return out;
}

struct StreamContext {
  const ModalBasis& basis;
  const std::vector<std::size_t>& modes;
  const ComplexTensor& vectors;  // n x n_exc
  const EngineConfig& cfg;
  int order;
};

void process_shard(const DerivativeTensorBatch& batch, const StreamContext& ctx, ComplexTensor& acc,
                   WorkspaceBudget& budget) {
  const std::size_t n = ctx.basis.size();
  const std::size_t M = static_cast<std::size_t>(ctx.order);
  const std::size_t n_exc = ctx.vectors.extent(1);
  const std::size_t n_sel = ctx.modes.size();
  const ShardGeometry g(n, batch.ranges);
  const ChunkChoice chunk = choose_chunks(g, n_sel, n_exc, budget.limit() - budget.current(), ctx.cfg.mode_chunk);
  constexpr std::size_t kC = sizeof(complex_t);
  const double inv_fact = 1.0 / factorial(ctx.order);
  const std::span<const complex_t> lambda(ctx.basis.lambda);

  // Row slices of phi for every trailing axis that is not fully covered.
  std::vector<ComplexTensor> phi_rows(M + 1);
  for (std::size_t l = 1; l <= M; ++l) {
    if (!g.ranges[l].covers(n)) phi_rows[l] = block(ctx.basis.phi, g.ranges[l], IndexRange::full(n));
  }
  auto phi_for = [&](std::size_t l) -> const ComplexTensor& {
    return g.ranges[l].covers(n) ? ctx.basis.phi : phi_rows[l];
  };

  const IndexRange r0 = g.ranges[0];
  for (std::size_t i0 = 0; i0 < n_sel; i0 += chunk.leading) {
    const std::size_t ci = std::min(chunk.leading, n_sel - i0);
    std::vector<complex_t> lambda_lead(ci);
    ComplexTensor lead(Shape{r0.width(), ci});
    for (std::size_t j = 0; j < ci; ++j) {
      const std::size_t mode = ctx.modes[i0 + j];
      lambda_lead[j] = lambda[mode];
      for (std::size_t k = 0; k < r0.width(); ++k) lead({k, j}) = ctx.basis.psi({mode, r0.start + k}) * inv_fact;
    }

    Tracked<complex_t> t;
    t.lease = budget.reserve(ci * g.trailing * kC);
    t.tensor = contract_leading(batch.values, lead);
    for (std::size_t l : g.full_mid) {
      auto lease = budget.reserve(t.tensor.bytes());
      t.tensor = contract_axis(t.tensor, ctx.basis.phi, l);
      t.lease = std::move(lease);
    }

    // Odometer over modal indices of the raw middle axes.
    std::vector<std::size_t> mu(g.raw_mid.size(), 0);
    bool more = true;
    while (more) {
      Tracked<complex_t> s;
      const ComplexTensor* src = &t.tensor;
      for (std::size_t q = 0; q < g.raw_mid.size(); ++q) {
        const std::size_t l = g.raw_mid[q];
        Shape shape = src->shape();
        shape[l] = 1;
        auto lease = budget.reserve(element_count(shape) * kC);
        ComplexTensor next = contract_axis(*src, phi_for(l), l, IndexRange{mu[q], mu[q] + 1});
        s.tensor = std::move(next);
        s.lease = std::move(lease);
        src = &s.tensor;
      }

      AxisEigenvalues axes(M + 1);
      axes[0] = lambda_lead;
      for (std::size_t l = 1; l < M; ++l) axes[l] = lambda;
      for (std::size_t q = 0; q < g.raw_mid.size(); ++q) axes[g.raw_mid[q]] = lambda.subspan(mu[q], 1);

      for (std::size_t c0 = 0; c0 < n; c0 += chunk.columns) {
        const IndexRange cols{c0, std::min(n, c0 + chunk.columns)};
        Tracked<complex_t> sc;
        sc.lease = budget.reserve(ci * g.prefix * cols.width() * kC);
        sc.tensor = contract_axis(*src, phi_for(M), M, cols);
        const bool last_use_of_t = g.raw_mid.empty() && cols.covers(n);
        if (last_use_of_t) t.reset();

        axes[M] = lambda.subspan(cols.start, cols.width());
        resonance_divide_inplace(sc.tensor, axes, ctx.cfg.epsilon);
        if (ctx.cfg.inject_sign_fault) {
          for (auto& v : sc.tensor.values()) v = -v;
        }

        // Contract against products of modal vectors. Prefix p enumerates
        // the middle modal indices; its global tuple row is base(p) * n + c.
        const std::size_t width = cols.width();
        const std::size_t stride = g.prefix * width;
        MatrixView<complex_t> out{acc.values().data() + i0 * n_exc, ci, n_exc, n_exc};
        const bool contiguous = g.raw_mid.empty() && cols.covers(n);
        std::size_t group = 1;
        if (contiguous) {
          const std::size_t room = budget.limit() - budget.current();
          group = std::clamp<std::size_t>(room / (width * n_exc * kC), 1, g.prefix);
        }
        std::vector<std::size_t> digit(M - 1, 0);
        for (std::size_t q = 0; q < g.raw_mid.size(); ++q) digit[g.raw_mid[q] - 1] = mu[q];
        for (std::size_t p = 0; p < g.prefix; p += group) {
          const std::size_t count = std::min(group, g.prefix - p);
          std::size_t base = 0;
          for (std::size_t l = 0; l + 1 < M; ++l) base = base * n + digit[l];
          auto lease = budget.reserve(count * width * n_exc * kC);
          const ComplexTensor rows =
              row_product(ctx.vectors, M, IndexRange{base * n + cols.start, base * n + cols.start + (count - 1) * n + width});
          MatrixView<const complex_t> lhs{sc.tensor.values().data() + p * width, ci, count * width, stride};
          gemm_accumulate<complex_t>(lhs, matrix_view(rows), out);
          // Advance the full middle axes by `count` prefixes.
          for (std::size_t step = 0; step < count; ++step) {
            for (std::size_t fi = g.full_mid.size(); fi-- > 0;) {
              const std::size_t l = g.full_mid[fi] - 1;
              if (++digit[l] < n) break;
              digit[l] = 0;
            }
          }
        }
        if (last_use_of_t) break;
      }

      more = false;
      for (std::size_t q = mu.size(); q-- > 0;) {
        if (++mu[q] < n) {
          more = true;
          break;
        }
        mu[q] = 0;
      }
    }
  }
}

void check_batch(const DerivativeTensorBatch& batch, const ShardSet& shards, std::size_t ordinal) {
  if (batch.order != shards.order() || batch.n_states != shards.n_states()) {
    throw InputError(fmt::format("shard {} has order {} / {} states, expected {} / {}", ordinal,
                                 batch.order, batch.n_states, shards.order(), shards.n_states()));
  }
  if (batch.ranges != shards.ranges(ordinal)) {
    throw InputError(fmt::format("shard {} ranges differ from its catalog entry", ordinal));
  }
}

}  // namespace

Contribution stream_order_contribution(const ShardSet& shards, const ModalBasis& basis,
                                       const ModeSubset& modes, const ComplexTensor& vectors,
                                       const EngineConfig& cfg) {
  const std::size_t n = basis.size();
  if (shards.n_states() != n) throw DimensionError("shard state count does not match modal basis");
  if (shards.order() < 2) throw ArgumentError("streamed contributions need order >= 2");
  if (vectors.rank() != 2 || vectors.extent(0) != n) throw DimensionError("modal vectors must be n x n_exc");
  if (modes.indices.empty()) throw SelectionError("mode selection is empty");
  for (std::size_t i : modes.indices) {
    if (i >= n) throw ArgumentError("mode index out of range");
  }
  verify_partition(shards);

  std::size_t per_batch = 0;
  for (std::size_t b = 0; b < shards.count(); ++b) {
    per_batch = std::max(per_batch, static_cast<std::size_t>(batch_bytes(shards.ranges(b), cfg.element_bytes)));
  }
  const std::size_t budget_bytes = kWorkspaceBudgetFactor * per_batch;
  const std::size_t n_exc = vectors.extent(1);
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, shards.count()));
  const StreamContext ctx{basis, modes.indices, vectors, cfg, shards.order()};

  std::vector<ComplexTensor> partial(workers, ComplexTensor(Shape{modes.size(), n_exc}));
  std::vector<std::size_t> peak(workers, 0);
  std::vector<std::exception_ptr> failure(workers);
  auto run = [&](std::size_t w) {
    try {
      WorkspaceBudget budget(budget_bytes);
      for (std::size_t b = w; b < shards.count(); b += workers) {
        cfg.deadline.check();
        const DerivativeTensorBatch batch = shards.load(b);
        check_batch(batch, shards, b);
        process_shard(batch, ctx, partial[w], budget);
      }
      peak[w] = budget.peak();
    } catch (...) {
      failure[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& th : pool) th.join();
  }
  for (auto& f : failure) {
    if (f) std::rethrow_exception(f);
  }

  Contribution result;
  result.values = std::move(partial[0]);
  for (std::size_t w = 1; w < workers; ++w) {
    auto dst = result.values.values();
    const auto src = partial[w].values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  result.stats.order = shards.order();
  result.stats.batches = shards.count();
  result.stats.per_batch_bytes = per_batch;
  result.stats.budget_bytes = budget_bytes;
  result.stats.peak_workspace_bytes = *std::max_element(peak.begin(), peak.end());
  if (result.stats.peak_workspace_bytes > budget_bytes) {
    throw InternalMemoryError("workspace peak exceeded its budget");
  }
  return result;
}

ModalInitialState compute_zeta(const ModalBasis& basis, const Excitation& exc) {
  const std::size_t n = basis.size();
  ModalInitialState state;
  state.states = exc.states(n);
  state.delta = exc.delta;
  state.zeta = ComplexTensor(Shape{n, state.states.size()});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t e = 0; e < state.states.size(); ++e) {
      state.zeta({i, e}) = exc.delta * basis.psi({i, state.states[e]});
    }
  }
  state.zeta_star = state.zeta;
  return state;
}

ModalInitialState correct_zeta(ModalInitialState state, const ShardCatalog& catalog,
                               const ModalBasis& basis, const EngineConfig& cfg,
                               std::vector<OrderStats>* stats) {
  if (cfg.correction == CorrectionMode::raw) return state;
  const ModeSubset every = all_modes(basis.size());
  state.zeta_star = state.zeta;
  for (int m = 2; m <= cfg.max_order; ++m) {
    const auto shards = catalog(m);
    if (!shards) throw InputError(fmt::format("no order-{} derivative shards available", m));
    Contribution c = stream_order_contribution(*shards, basis, every, state.zeta, cfg);
    auto dst = state.zeta_star.values();
    const auto corr = c.values.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= corr[i];
    if (stats) stats->push_back(c.stats);
  }
  state.correction_order = cfg.max_order;
  return state;
}

HTensor export_h_tensor(const ShardSet& shards, const ModalBasis& basis, const ModeSubset& modes,
                        const EngineConfig& cfg) {
  const std::size_t n = basis.size();
  const int order = shards.order();
  const std::size_t M = static_cast<std::size_t>(order);
  if (shards.n_states() != n) throw DimensionError("shard state count does not match modal basis");
  Shape shape(M + 1, n);
  shape[0] = modes.size();
  const ByteEstimate need = estimate_bytes(shape, sizeof(complex_t));
  if (need.bytes > PlannerInput{M + 1, n, cfg.memory_limit_gib, 8}.limit_bytes()) {
    throw MemoryLimitError(fmt::format(
        "order-{} h tensor needs {:.2f} GiB, above the {:.2f} GiB limit; use the streaming path",
        order, need.gib, cfg.memory_limit_gib));
  }
  verify_partition(shards);

  ComplexTensor cn(shape);
  const double inv_fact = 1.0 / factorial(order);
  for (std::size_t b = 0; b < shards.count(); ++b) {
    cfg.deadline.check();
    const DerivativeTensorBatch batch = shards.load(b);
    check_batch(batch, shards, b);
    const IndexRange r0 = batch.ranges[0];
    ComplexTensor lead(Shape{r0.width(), modes.size()});
    for (std::size_t j = 0; j < modes.size(); ++j) {
      for (std::size_t k = 0; k < r0.width(); ++k) {
        lead({k, j}) = basis.psi({modes.indices[j], r0.start + k}) * inv_fact;
      }
    }
    ComplexTensor t = contract_axis(batch.values, lead, 0);
    for (std::size_t l = 1; l <= M; ++l) {
      const IndexRange r = batch.ranges[l];
      t = r.covers(n) ? contract_axis(t, basis.phi, l)
                      : contract_axis(t, block(basis.phi, r, IndexRange::full(n)), l);
    }
    auto dst = cn.values();
    const auto src = t.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  std::vector<complex_t> lambda_lead;
  for (std::size_t i : modes.indices) lambda_lead.push_back(basis.lambda[i]);
  AxisEigenvalues axes(M + 1, std::span<const complex_t>(basis.lambda));
  axes[0] = lambda_lead;
  resonance_divide_inplace(cn, axes, cfg.epsilon);
  return {order, cfg.epsilon, modes.indices, std::move(cn)};
}

NpfResult assemble_result(const ModalBasis& basis, const ModeSubset& modes,
                          const ModalInitialState& state,
                          std::vector<ComplexTensor> contributions, const EngineConfig& cfg) {
  const std::size_t n_sel = modes.size();
  const std::size_t n_exc = state.states.size();
  NpfResult r;
  r.modes = modes.indices;
  for (std::size_t i : modes.indices) r.eigenvalues.push_back(basis.lambda[i]);
  r.states = state.states;
  r.delta = state.delta;
  r.epsilon = cfg.epsilon;
  r.max_order = cfg.max_order;
  r.correction = cfg.correction;

  r.linear = ComplexTensor(Shape{n_sel, n_exc});
  for (std::size_t s = 0; s < n_sel; ++s) {
    for (std::size_t e = 0; e < n_exc; ++e) {
      r.linear({s, e}) = basis.phi({state.states[e], modes.indices[s]}) * state.zeta_star({modes.indices[s], e});
    }
  }
  r.total = r.linear;
  for (auto& c : contributions) {
    if (c.shape() != Shape{n_sel, n_exc}) throw DimensionError("contribution has the wrong shape");
    for (std::size_t s = 0; s < n_sel; ++s) {
      for (std::size_t e = 0; e < n_exc; ++e) {
        c({s, e}) *= basis.phi({state.states[e], modes.indices[s]});
        r.total({s, e}) += c({s, e});
      }
    }
    r.higher.push_back(std::move(c));
  }
  return r;
}

NpfResult compute_npf(const ShardCatalog& catalog, const ModalBasis& basis,
                      const ModeSubset& modes, const EngineConfig& cfg, const Excitation& exc) {
  cfg.validate();
  std::vector<OrderStats> stats;
  ModalInitialState state = compute_zeta(basis, exc);
  state = correct_zeta(std::move(state), catalog, basis, cfg, &stats);

  std::vector<ComplexTensor> contributions;
  for (int m = 2; m <= cfg.max_order; ++m) {
    const auto shards = catalog(m);
    if (!shards) throw InputError(fmt::format("no order-{} derivative shards available", m));
    Contribution c = stream_order_contribution(*shards, basis, modes, state.zeta_star, cfg);
    stats.push_back(c.stats);
    contributions.push_back(std::move(c.values));
  }
  NpfResult r = assemble_result(basis, modes, state, std::move(contributions), cfg);
  r.method = "VBT";
  r.stats = std::move(stats);
  return r;
}

NpfResult compute_npf(const SystemModel& model, const EquilibriumPoint& eq,
                      const ModalBasis& basis, const ModeSubset& modes, const EngineConfig& cfg,
                      const Excitation& exc) {
  return compute_npf(generated_catalog(model, eq, cfg), basis, modes, cfg, exc);
}

}  // namespace npfkit
