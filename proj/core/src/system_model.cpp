#include "npfkit/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace npfkit {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double falling_factorial(unsigned p, unsigned m) {
  double r = 1.0;
  for (unsigned i = 0; i < m; ++i) r *= static_cast<double>(p - i);
  return r;
}

// d^N/du^N sin(u).
double sine_derivative(int order, double u) {
  switch (order % 4) {
    case 0: return std::sin(u);
    case 1: return std::cos(u);
    case 2: return -std::sin(u);
    default: return -std::cos(u);
  }
}

void check_ranges(std::span<const IndexRange> ranges, std::size_t n, int order) {
  if (order < 1) throw ArgumentError("derivative order must be at least 1");
  if (ranges.size() != static_cast<std::size_t>(order) + 1) {
    throw DimensionError(fmt::format("order-{} derivative tensor needs {} ranges, got {}", order,
                                     order + 1, ranges.size()));
  }
  for (const auto& r : ranges) check_range(r, n, "derivative batch range");
}

Shape range_shape(std::span<const IndexRange> ranges) {
  Shape shape;
  shape.reserve(ranges.size());
  for (const auto& r : ranges) shape.push_back(r.width());
  return shape;
}

// Visits every sequence of length `order` drawn from `alphabet`.
template <typename F>
void for_each_sequence(std::span<const std::size_t> alphabet, int order, F&& visit) {
  std::vector<std::size_t> pos(static_cast<std::size_t>(order), 0);
  std::vector<std::size_t> seq(static_cast<std::size_t>(order), alphabet[0]);
  while (true) {
    visit(std::span<const std::size_t>(seq));
    std::size_t l = seq.size();
    while (l-- > 0) {
      if (++pos[l] < alphabet.size()) {
        seq[l] = alphabet[pos[l]];
        break;
      }
      pos[l] = 0;
      seq[l] = alphabet[0];
    }
    if (l == static_cast<std::size_t>(-1)) return;
  }
}

// Adds `value` at (k, seq...) when every index falls inside its range.
void accumulate_entry(RealTensor& values, std::span<const IndexRange> ranges, std::size_t k,
                      std::span<const std::size_t> seq, double value) {
  if (!ranges[0].contains(k)) return;
  std::size_t flat = k - ranges[0].start;
  for (std::size_t l = 0; l < seq.size(); ++l) {
    const IndexRange& r = ranges[l + 1];
    if (!r.contains(seq[l])) return;
    flat = flat * r.width() + (seq[l] - r.start);
  }
  values.values()[flat] += value;
}

void exact_polynomial(const PolynomialSystem& sys, std::span<const double> x, int order,
                      std::span<const IndexRange> ranges, RealTensor& values) {
  std::vector<std::size_t> alphabet;
  std::vector<unsigned> counts;
  for (const auto& term : sys.terms()) {
    if (!ranges[0].contains(term.target)) continue;
    if (term.degree() < static_cast<unsigned>(order)) continue;
    alphabet.clear();
    for (const auto& f : term.factors) alphabet.push_back(f.state);
    for_each_sequence(alphabet, order, [&](std::span<const std::size_t> seq) {
      counts.assign(term.factors.size(), 0);
      for (std::size_t a : seq) {
        for (std::size_t f = 0; f < term.factors.size(); ++f) {
          if (term.factors[f].state == a) {
            ++counts[f];
            break;
          }
        }
      }
      double v = term.coefficient;
      for (std::size_t f = 0; f < term.factors.size(); ++f) {
        const unsigned p = term.factors[f].power;
        if (counts[f] > p) return;
        v *= falling_factorial(p, counts[f]) *
             std::pow(x[term.factors[f].state], static_cast<double>(p - counts[f]));
      }
      accumulate_entry(values, ranges, term.target, seq, v);
    });
  }
}

void exact_sine(const SineNetwork& net, std::span<const double> x, int order,
                std::span<const IndexRange> ranges, RealTensor& values) {
  const std::size_t m = net.machines;
  if (order == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t a[] = {m + i};
      accumulate_entry(values, ranges, i, a, 1.0);
      accumulate_entry(values, ranges, m + i, a, -net.damping[i] / net.inertia[i]);
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t row = m + i;
    if (!ranges[0].contains(row)) continue;
    const double inv_m = 1.0 / net.inertia[i];
    for (std::size_t j = 0; j < m; ++j) {
      const double k_ij = net.voltage[i] * net.voltage[j] * net.coupling[i][j];
      if (j == i || k_ij == 0.0) continue;
      const double d = sine_derivative(order, x[i] - x[j]);
      const std::size_t alphabet[] = {i, j};
      for_each_sequence(std::span<const std::size_t>(alphabet), order,
                        [&](std::span<const std::size_t> seq) {
                          const auto minus = std::count(seq.begin(), seq.end(), j);
                          const double sign = (minus % 2 == 0) ? 1.0 : -1.0;
                          accumulate_entry(values, ranges, row, seq, -k_ij * inv_m * sign * d);
                        });
    }
    const double k_inf = net.voltage[i] * net.infinite_bus[i];
    if (k_inf != 0.0) {
      const std::vector<std::size_t> seq(static_cast<std::size_t>(order), i);
      accumulate_entry(values, ranges, row, seq, -k_inf * inv_m * sine_derivative(order, x[i]));
    }
  }
}

}  // namespace

// --- model types ---------------------------------------------------------------

unsigned PolynomialTerm::degree() const noexcept {
  unsigned d = 0;
  for (const auto& f : factors) d += f.power;
  return d;
}

PolynomialSystem::PolynomialSystem(std::size_t n_states, std::vector<PolynomialTerm> terms)
    : n_states_(n_states), terms_(std::move(terms)) {
  if (n_states_ == 0) throw ArgumentError("polynomial system needs at least one state");
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    auto& term = terms_[t];
    if (term.target >= n_states_) {
      throw ArgumentError(fmt::format("term {}: target state {} out of range", t, term.target));
    }
    std::map<std::size_t, unsigned> merged;
    for (const auto& f : term.factors) {
      if (f.state >= n_states_) {
        throw ArgumentError(fmt::format("term {}: state {} out of range", t, f.state));
      }
      if (f.power == 0) throw ArgumentError(fmt::format("term {}: power must be >= 1", t));
      merged[f.state] += f.power;
    }
    term.factors.clear();
    for (const auto& [s, p] : merged) term.factors.push_back({s, p});
  }
}

unsigned PolynomialSystem::max_degree() const noexcept {
  unsigned d = 0;
  for (const auto& t : terms_) d = std::max(d, t.degree());
  return d;
}

void SineNetwork::validate() const {
  const std::size_t m = machines;
  if (m == 0) throw ArgumentError("sine network needs at least one machine");
  auto check_len = [m](const std::vector<double>& v, const char* what) {
    if (v.size() != m) throw ArgumentError(fmt::format("{} must have {} entries", what, m));
  };
  check_len(inertia, "inertia");
  check_len(damping, "damping");
  check_len(power, "power");
  check_len(voltage, "voltage");
  check_len(infinite_bus, "infinite_bus");
  if (coupling.size() != m) throw ArgumentError("coupling must be m x m");
  for (std::size_t i = 0; i < m; ++i) {
    if (coupling[i].size() != m) throw ArgumentError("coupling must be m x m");
    if (!(inertia[i] > 0.0)) throw ArgumentError("inertia must be strictly positive");
    if (damping[i] < 0.0) throw ArgumentError("damping must be non-negative");
    if (coupling[i][i] != 0.0) throw ArgumentError("coupling diagonal must be zero");
    for (std::size_t j = 0; j < i; ++j) {
      if (coupling[i][j] != coupling[j][i]) {
        throw ArgumentError(fmt::format("coupling is not symmetric at ({}, {})", i, j));
      }
    }
  }
}

std::size_t state_count(const SystemModel& model) {
  return std::visit([](const auto& m) { return m.n_states(); }, model);
}

// --- evaluation ------------------------------------------------------------------

std::vector<double> eval_field(const SystemModel& model, std::span<const double> x) {
  const std::size_t n = state_count(model);
  if (x.size() != n) {
    throw DimensionError(fmt::format("state vector has length {}, model has {} states", x.size(), n));
  }
  std::vector<double> f(n, 0.0);
  std::visit(overloaded{
                 [&](const PolynomialSystem& sys) {
                   for (const auto& term : sys.terms()) {
                     double v = term.coefficient;
                     for (const auto& fac : term.factors) {
                       v *= std::pow(x[fac.state], static_cast<double>(fac.power));
                     }
                     f[term.target] += v;
                   }
                 },
                 [&](const SineNetwork& net) {
                   const std::size_t m = net.machines;
                   for (std::size_t i = 0; i < m; ++i) {
                     f[i] = x[m + i];
                     double acc = net.power[i] - net.damping[i] * x[m + i];
                     for (std::size_t j = 0; j < m; ++j) {
                       if (j == i) continue;
                       acc -= net.voltage[i] * net.voltage[j] * net.coupling[i][j] *
                              std::sin(x[i] - x[j]);
                     }
                     acc -= net.voltage[i] * net.infinite_bus[i] * std::sin(x[i]);
                     f[m + i] = acc / net.inertia[i];
                   }
                 },
             },
             model);
  return f;
}

double field_residual(const SystemModel& model, std::span<const double> x) {
  double r = 0.0;
  for (double v : eval_field(model, x)) r = std::max(r, std::abs(v));
  return r;
}

RealTensor jacobian(const SystemModel& model, std::span<const double> x) {
  EquilibriumPoint at{std::vector<double>(x.begin(), x.end()), 0.0};
  const auto ranges = full_ranges(state_count(model), 1);
  return derivative_batch_exact(model, at, 1, ranges).values;
}

EquilibriumPoint solve_equilibrium(const SystemModel& model, std::span<const double> guess,
                                   double tol, int max_iter) {
  const std::size_t n = state_count(model);
  if (guess.size() != n) throw DimensionError("equilibrium guess has wrong length");
  for (double g : guess) {
    if (!std::isfinite(g)) throw ArgumentError("equilibrium guess must be finite");
  }
  std::vector<double> x(guess.begin(), guess.end());
  for (int iter = 0; iter <= max_iter; ++iter) {
    const auto f = eval_field(model, x);
    double residual = 0.0;
    for (double v : f) residual = std::max(residual, std::abs(v));
    if (residual <= tol) return {x, residual};
    if (iter == max_iter) break;

    const RealTensor jt = jacobian(model, x);
    Eigen::MatrixXd jac(n, n);
    Eigen::VectorXd rhs(n);
    for (std::size_t r = 0; r < n; ++r) {
      rhs(r) = -f[r];
      for (std::size_t c = 0; c < n; ++c) jac(r, c) = jt({r, c});
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) {
      throw SingularityError(fmt::format("singular Jacobian at Newton iterate {}", iter));
    }
    const Eigen::VectorXd step = lu.solve(rhs);
    for (std::size_t r = 0; r < n; ++r) x[r] += step(r);
  }
  throw EquilibriumError(
      fmt::format("Newton iteration did not converge to {} in {} iterations", tol, max_iter));
}

EquilibriumPoint verify_equilibrium(const SystemModel& model, std::span<const double> x,
                                    double tol) {
  const double residual = field_residual(model, x);
  if (!(residual <= tol)) {
    throw EquilibriumError(
        fmt::format("declared equilibrium has residual {:.3e} above tolerance {:.1e}", residual, tol));
  }
  return {std::vector<double>(x.begin(), x.end()), residual};
}

EquilibriumPoint equilibrium_for(const SystemDefinition& def, double tol) {
  const std::size_t n = state_count(def.model);
  if (def.equilibrium) {
    if (def.equilibrium->size() != n) throw DimensionError("declared equilibrium has wrong length");
    if (field_residual(def.model, *def.equilibrium) <= tol) {
      return verify_equilibrium(def.model, *def.equilibrium, tol);
    }
    return solve_equilibrium(def.model, *def.equilibrium, tol);
  }
  const std::vector<double> origin(n, 0.0);
  return solve_equilibrium(def.model, origin, tol);
}

// --- derivative providers --------------------------------------------------------

std::vector<IndexRange> full_ranges(std::size_t n_states, int order) {
  if (order < 1) throw ArgumentError("derivative order must be at least 1");
  return std::vector<IndexRange>(static_cast<std::size_t>(order) + 1, IndexRange::full(n_states));
}

DerivativeTensorBatch derivative_batch_exact(const SystemModel& model, const EquilibriumPoint& eq,
                                             int order, std::span<const IndexRange> ranges) {
  const std::size_t n = state_count(model);
  check_ranges(ranges, n, order);
  if (eq.x.size() != n) throw DimensionError("equilibrium has wrong length");

  DerivativeTensorBatch batch;
  batch.order = order;
  batch.n_states = n;
  batch.ranges.assign(ranges.begin(), ranges.end());
  batch.values = RealTensor(range_shape(ranges));
  std::visit(overloaded{
                 [&](const PolynomialSystem& sys) { exact_polynomial(sys, eq.x, order, ranges, batch.values); },
                 [&](const SineNetwork& net) { exact_sine(net, eq.x, order, ranges, batch.values); },
             },
             model);
  return batch;
}

DerivativeTensorBatch derivative_batch_fd(const SystemModel& model, const EquilibriumPoint& eq,
                                          int order, std::span<const IndexRange> ranges,
                                          FdStepPolicy policy) {
  const std::size_t n = state_count(model);
  check_ranges(ranges, n, order);
  if (order > kMaxFiniteDifferenceOrder) {
    throw ArgumentError(fmt::format("finite differences support orders up to {}, requested {}",
                                    kMaxFiniteDifferenceOrder, order));
  }
  if (eq.x.size() != n) throw DimensionError("equilibrium has wrong length");

  DerivativeTensorBatch batch;
  batch.order = order;
  batch.n_states = n;
  batch.ranges.assign(ranges.begin(), ranges.end());
  batch.values = RealTensor(range_shape(ranges));

  // One Richardson step on top of the central product stencil cancels its h^2
  // error term, so the balanced step is eps^(1/(N+4)).
  const double eps = std::numeric_limits<double>::epsilon();
  const double base = std::pow(eps, 1.0 / (order + 4)) * policy.scale;
  std::vector<double> step(n);
  for (std::size_t a = 0; a < n; ++a) {
    step[a] = base * std::max(1.0, std::abs(eq.x[a]));
    if (eq.x[a] + step[a] == eq.x[a]) {
      batch.warnings.push_back(
          fmt::format("finite-difference step {:.3e} underflows state {} scale", step[a], a));
    }
  }

  const std::size_t N = static_cast<std::size_t>(order);
  auto central = [&](const std::vector<std::size_t>& tuple, double scale) {
    std::vector<double> acc(n, 0.0);
    std::vector<double> x(eq.x);
    for (std::size_t mask = 0; mask < (std::size_t{1} << N); ++mask) {
      std::copy(eq.x.begin(), eq.x.end(), x.begin());
      double sign = 1.0;
      for (std::size_t l = 0; l < N; ++l) {
        const bool minus = (mask >> l) & 1U;
        const double h = scale * step[tuple[l]];
        x[tuple[l]] += minus ? -h : h;
        if (minus) sign = -sign;
      }
      const auto f = eval_field(model, x);
      for (std::size_t k = 0; k < n; ++k) acc[k] += sign * f[k];
    }
    double denom = 1.0;
    for (std::size_t l = 0; l < N; ++l) denom *= 2.0 * scale * step[tuple[l]];
    for (double& v : acc) v /= denom;
    return acc;
  };
  std::map<std::vector<std::size_t>, std::vector<double>> cache;
  auto stencil = [&](const std::vector<std::size_t>& tuple) {
    std::vector<double> fine = central(tuple, 1.0);
    const std::vector<double> coarse = central(tuple, 2.0);
    for (std::size_t k = 0; k < n; ++k) fine[k] = (4.0 * fine[k] - coarse[k]) / 3.0;
    return fine;
  };

  std::vector<std::size_t> tuple(N);
  for (std::size_t l = 0; l < N; ++l) tuple[l] = ranges[l + 1].start;
  const std::size_t trailing = element_count(range_shape(ranges.subspan(1)));
  auto out = batch.values.values();
  for (std::size_t t = 0; t < trailing; ++t) {
    std::vector<std::size_t> key(tuple);
    std::sort(key.begin(), key.end());
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, stencil(key)).first;
    for (std::size_t k = ranges[0].start; k < ranges[0].end; ++k) {
      out[(k - ranges[0].start) * trailing + t] = it->second[k];
    }
    for (std::size_t l = N; l-- > 0;) {
      if (++tuple[l] < ranges[l + 1].end) break;
      tuple[l] = ranges[l + 1].start;
    }
  }
  return batch;
}

// --- random systems ------------------------------------------------------------------

PolynomialSystem gen_random_poly(const RandomPolyOptions& options) {
  const std::size_t n = options.n;
  if (n < 1) throw ArgumentError("random system needs at least one state");
  if (options.max_degree < 1) throw ArgumentError("max_degree must be at least 1");
  if (!(options.density > 0.0 && options.density <= 1.0)) {
    throw ArgumentError("density must lie in (0, 1]");
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  Eigen::MatrixXd a(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) a(r, c) = coef(rng);
  }
  const Eigen::VectorXcd eig = a.eigenvalues();
  double max_re = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < eig.size(); ++i) max_re = std::max(max_re, eig(i).real());
  const double shift = std::max(0.0, max_re + options.stability_margin);
  a -= shift * Eigen::MatrixXd::Identity(n, n);

  std::vector<PolynomialTerm> terms;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      if (a(k, j) != 0.0) terms.push_back({k, a(k, j), {{j, 1}}});
    }
  }
  for (unsigned degree = 2; degree <= options.max_degree; ++degree) {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t candidate = 0; candidate < n; ++candidate) {
        if (unit(rng) >= options.density) continue;
        PolynomialTerm term{k, coef(rng), {}};
        for (unsigned d = 0; d < degree; ++d) term.factors.push_back({pick(rng), 1});
        terms.push_back(std::move(term));
      }
    }
  }
  return PolynomialSystem(n, std::move(terms));
}

}  // namespace npfkit
