#include "npfkit/reference.hpp"

#include <cmath>

#include <fmt/format.h>

namespace npfkit {

namespace {

double factorial(int m) {
  double f = 1.0;
  for (int i = 2; i <= m; ++i) f *= i;
  return f;
}

std::size_t ipow(std::size_t n, int p) {
  std::size_t r = 1;
  for (int i = 0; i < p; ++i) r *= n;
  return r;
}

complex_t clamp(complex_t d, double eps) { return std::abs(d) < eps ? complex_t(eps, 0.0) : d; }

RealTensor full_derivatives(const SystemModel& model, const EquilibriumPoint& eq, int order,
                            DerivativeProvider provider) {
  const auto ranges = full_ranges(state_count(model), order);
  auto batch = provider == DerivativeProvider::exact ? derivative_batch_exact(model, eq, order, ranges)
                                                     : derivative_batch_fd(model, eq, order, ranges);
  return std::move(batch.values);
}

// v[i] = sum over alpha of h[i, alpha] * prod_l x[alpha_l], partial products
// reused across the odometer.
std::vector<complex_t> apply_h(const HTensor& h, std::size_t n, const std::vector<complex_t>& x) {
  const int m = h.order;
  const std::size_t tuples = ipow(n, m);
  const complex_t* data = h.values.values().data();
  std::vector<complex_t> out(n, 0.0);
  std::vector<std::size_t> digit(m, 0);
  std::vector<complex_t> pp(m);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(digit.begin(), digit.end(), 0);
    int dirty = 0;
    complex_t sum = 0.0;
    for (std::size_t a = 0; a < tuples; ++a) {
      for (int l = dirty; l < m; ++l) pp[l] = (l == 0 ? complex_t(1.0) : pp[l - 1]) * x[digit[l]];
      sum += data[i * tuples + a] * pp[m - 1];
      int l = m - 1;
      while (l >= 0 && ++digit[l] == n) digit[l--] = 0;
      dirty = std::max(l, 0);
    }
    out[i] = sum;
  }
  return out;
}

}  // namespace

HTensor h_traditional(int order, const RealTensor& derivatives, const ModalBasis& basis,
                      double epsilon, const ReferenceOptions& options) {
  const std::size_t n = basis.size();
  if (order < 1 || order > kMaxTraditionalOrder) {
    throw ArgumentError(fmt::format("traditional method supports orders 1..{}", kMaxTraditionalOrder));
  }
  if (n > options.max_states) {
    throw MemoryLimitError(fmt::format("traditional method limited to n <= {} (got n = {})",
                                       options.max_states, n));
  }
  if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
  if (derivatives.shape() != Shape(static_cast<std::size_t>(order) + 1, n)) {
    throw DimensionError("derivative tensor shape does not match order and basis");
  }
  const int m = order;
  const std::size_t tuples = ipow(n, m);
  const double* a = derivatives.values().data();
  const double inv_fact = 1.0 / factorial(m);

  std::vector<complex_t> psi(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) psi[i * n + k] = basis.psi({i, k}) * inv_fact;
  }

  std::vector<complex_t> phi(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) phi[r * n + c] = basis.phi({r, c});
  }

  Shape shape(static_cast<std::size_t>(m) + 1, n);
  HTensor h{m, epsilon, all_modes(n).indices, ComplexTensor(shape)};
  complex_t* out = h.values.values().data();
  std::vector<std::size_t> alpha(m, 0), s(m, 0);
  std::vector<complex_t> pp(m);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(alpha.begin(), alpha.end(), 0);
    for (std::size_t ai = 0; ai < tuples; ++ai) {
      if ((ai & 63) == 0) options.deadline.check();
      complex_t lam_sum = 0.0;
      for (int l = 0; l < m; ++l) lam_sum += basis.lambda[alpha[l]];
      const complex_t denom = clamp(lam_sum - basis.lambda[i], epsilon);

      std::fill(s.begin(), s.end(), 0);
      int dirty = 0;
      complex_t sum = 0.0;
      for (std::size_t si = 0; si < tuples; ++si) {
        for (int l = dirty; l < m; ++l) {
          const complex_t f = phi[s[l] * n + alpha[l]];
          pp[l] = l == 0 ? f : pp[l - 1] * f;
        }
        complex_t term = 0.0;
        for (std::size_t k = 0; k < n; ++k) term += psi[i * n + k] * a[k * tuples + si];
        sum += term * pp[m - 1];
        int l = m - 1;
        while (l >= 0 && ++s[l] == n) s[l--] = 0;
        dirty = std::max(l, 0);
      }
      out[i * tuples + ai] = sum / denom;

      for (int l = m - 1; l >= 0; --l) {
        if (++alpha[l] < n) break;
        alpha[l] = 0;
      }
    }
  }
  return h;
}

NpfResult npf_traditional(const SystemModel& model, const EquilibriumPoint& eq,
                          const ModalBasis& basis, const ModeSubset& modes,
                          const EngineConfig& cfg, const Excitation& exc,
                          const ReferenceOptions& options) {
  cfg.validate();
  const std::size_t n = basis.size();
  if (state_count(model) != n) throw DimensionError("model and basis sizes differ");
  if (n > options.max_states) {
    throw MemoryLimitError(fmt::format("traditional method limited to n <= {} (got n = {})",
                                       options.max_states, n));
  }
  if (cfg.max_order > kMaxTraditionalOrder) {
    throw ArgumentError(fmt::format("traditional method supports orders up to {}", kMaxTraditionalOrder));
  }
  const auto states = exc.states(n);
  const std::size_t n_exc = states.size();

  std::vector<HTensor> h;
  for (int m = 2; m <= cfg.max_order; ++m) {
    h.push_back(h_traditional(m, full_derivatives(model, eq, m, cfg.provider), basis, cfg.epsilon, options));
  }

  // Columns of zeta and zeta*, one per excited state.
  std::vector<std::vector<complex_t>> zeta(n_exc, std::vector<complex_t>(n));
  for (std::size_t e = 0; e < n_exc; ++e) {
    for (std::size_t i = 0; i < n; ++i) zeta[e][i] = exc.delta * basis.psi({i, states[e]});
  }
  auto zeta_star = zeta;
  if (cfg.correction == CorrectionMode::corrected) {
    for (std::size_t e = 0; e < n_exc; ++e) {
      for (const auto& hm : h) {
        const auto corr = apply_h(hm, n, zeta[e]);
        for (std::size_t i = 0; i < n; ++i) zeta_star[e][i] -= corr[i];
      }
    }
  }

  NpfResult r;
  r.method = "T";
  r.modes = modes.indices;
  for (std::size_t i : modes.indices) r.eigenvalues.push_back(basis.lambda[i]);
  r.states = states;
  r.delta = exc.delta;
  r.epsilon = cfg.epsilon;
  r.max_order = cfg.max_order;
  r.correction = cfg.correction;
  const Shape block{modes.size(), n_exc};
  r.linear = ComplexTensor(block);
  for (std::size_t s = 0; s < modes.size(); ++s) {
    for (std::size_t e = 0; e < n_exc; ++e) {
      const std::size_t i = modes.indices[s];
      r.linear({s, e}) = basis.phi({states[e], i}) * zeta_star[e][i];
    }
  }
  r.total = r.linear;
  for (const auto& hm : h) {
    ComplexTensor p(block);
    for (std::size_t e = 0; e < n_exc; ++e) {
      const auto v = apply_h(hm, n, zeta_star[e]);
      for (std::size_t s = 0; s < modes.size(); ++s) {
        const std::size_t i = modes.indices[s];
        p({s, e}) = basis.phi({states[e], i}) * v[i];
        r.total({s, e}) += p({s, e});
      }
    }
    r.higher.push_back(std::move(p));
  }
  return r;
}

wide_uint tc_tensor_bytes(std::size_t n_states, int max_order) {
  const Shape dims(static_cast<std::size_t>(max_order) + 1, n_states);
  return estimate_bytes(dims, sizeof(complex_t)).bytes;
}

namespace {

// Algorithm 2 for one order with every intermediate held in full. Returns
// sum_alpha hM[i, alpha] prod_l vectors[alpha_l, e] as an n x n_exc tensor.
ComplexTensor tc_order(const RealTensor& a, const ModalBasis& basis, const ComplexTensor& vectors,
                       int m, double epsilon) {
  const std::size_t n = basis.size();
  const std::size_t rank = static_cast<std::size_t>(m) + 1;

  ComplexTensor psi_t = transpose(basis.psi);
  for (auto& v : psi_t.values()) v /= factorial(m);
  ComplexTensor c = contract_axis(a, psi_t, 0);
  for (std::size_t l = 1; l < rank; ++l) c = contract_axis(c, basis.phi, l);

  ComplexTensor dn(c.shape());
  {
    auto d = dn.values();
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < d.size(); ++flat) {
      complex_t sum = -basis.lambda[idx[0]];
      for (std::size_t l = 1; l < rank; ++l) sum += basis.lambda[idx[l]];
      d[flat] = clamp_denominator(sum, epsilon);
      for (std::size_t l = rank; l-- > 0;) {
        if (++idx[l] < n) break;
        idx[l] = 0;
      }
    }
  }
  {
    auto cv = c.values();
    const auto dv = dn.values();
    for (std::size_t i = 0; i < cv.size(); ++i) cv[i] /= dv[i];
  }
  dn = ComplexTensor();

  std::vector<std::size_t> perm(rank);
  perm[0] = 0;
  for (std::size_t l = 1; l < rank; ++l) perm[l] = rank - l;
  ComplexTensor h = permute(c, perm).reshaped(Shape{n, ipow(n, m)});
  return matmul(h, row_product(vectors, static_cast<std::size_t>(m)));
}

}  // namespace

NpfResult npf_tc_unbatched(const SystemModel& model, const EquilibriumPoint& eq,
                           const ModalBasis& basis, const ModeSubset& modes,
                           const EngineConfig& cfg, const Excitation& exc) {
  cfg.validate();
  const std::size_t n = basis.size();
  if (state_count(model) != n) throw DimensionError("model and basis sizes differ");
  const wide_uint need = tc_tensor_bytes(n, cfg.max_order);
  const wide_uint limit = PlannerInput{1, 1, cfg.memory_limit_gib, 8}.limit_bytes();
  if (need > limit) {
    throw MemoryLimitError(fmt::format("unbatched contraction needs {:.2f} GiB for its order-{} tensors, "
                                       "above the {:.2f} GiB limit",
                                       to_double(need) / kBytesPerGiB, cfg.max_order, cfg.memory_limit_gib));
  }

  ModalInitialState state = compute_zeta(basis, exc);
  std::vector<RealTensor> a;
  for (int m = 2; m <= cfg.max_order; ++m) {
    cfg.deadline.check();
    a.push_back(full_derivatives(model, eq, m, cfg.provider));
  }
  if (cfg.correction == CorrectionMode::corrected) {
    for (int m = 2; m <= cfg.max_order; ++m) {
      const ComplexTensor corr = tc_order(a[m - 2], basis, state.zeta, m, cfg.epsilon);
      auto dst = state.zeta_star.values();
      const auto src = corr.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
    }
    state.correction_order = cfg.max_order;
  }

  std::vector<ComplexTensor> contributions;
  for (int m = 2; m <= cfg.max_order; ++m) {
    cfg.deadline.check();
    contributions.push_back(gather_rows(tc_order(a[m - 2], basis, state.zeta_star, m, cfg.epsilon),
                                        std::span<const std::size_t>(modes.indices)));
  }
  NpfResult r = assemble_result(basis, modes, state, std::move(contributions), cfg);
  r.method = "TC";
  return r;
}

}  // namespace npfkit
