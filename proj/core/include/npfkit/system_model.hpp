#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "npfkit/tensor.hpp"

namespace npfkit {

struct PowerFactor {
  std::size_t state = 0;
  unsigned power = 1;

  friend bool operator==(const PowerFactor&, const PowerFactor&) = default;
};

/// One monomial c * prod(x_s^p_s) contributing to d/dt x_target.
struct PolynomialTerm {
  std::size_t target = 0;
  double coefficient = 0.0;
  std::vector<PowerFactor> factors;  // sorted by state, one entry per state

  unsigned degree() const noexcept;
  friend bool operator==(const PolynomialTerm&, const PolynomialTerm&) = default;
};

class PolynomialSystem {
 public:
  PolynomialSystem() = default;

  /// Validates indices and merges repeated states inside each term.
  PolynomialSystem(std::size_t n_states, std::vector<PolynomialTerm> terms);

  std::size_t n_states() const noexcept { return n_states_; }
  const std::vector<PolynomialTerm>& terms() const noexcept { return terms_; }
  unsigned max_degree() const noexcept;

  friend bool operator==(const PolynomialSystem&, const PolynomialSystem&) = default;

 private:
  std::size_t n_states_ = 0;
  std::vector<PolynomialTerm> terms_;
};

/// Classical swing-equation network. States are ordered as all rotor angles
/// followed by all speed deviations:
///   d(delta_i)/dt = omega_i
///   d(omega_i)/dt = (P_i - D_i omega_i
///                    - sum_j E_i E_j B_ij sin(delta_i - delta_j)
///                    - E_i Binf_i sin(delta_i)) / M_i
/// Binf couples machine i to an infinite bus at angle zero and removes the
/// rotational invariance of the pure machine-to-machine network.
struct SineNetwork {
  std::size_t machines = 0;
  std::vector<double> inertia;
  std::vector<double> damping;
  std::vector<double> power;
  std::vector<double> voltage;
  std::vector<std::vector<double>> coupling;
  std::vector<double> infinite_bus;

  std::size_t n_states() const noexcept { return 2 * machines; }

  /// Throws ArgumentError when an invariant is violated.
  void validate() const;
};

using SystemModel = std::variant<PolynomialSystem, SineNetwork>;

std::size_t state_count(const SystemModel& model);

struct SystemDefinition {
  std::string name;
  SystemModel model;
  std::optional<std::vector<double>> equilibrium;
};

struct EquilibriumPoint {
  std::vector<double> x;
  double residual = 0.0;
};

inline constexpr double kDefaultEquilibriumTolerance = 1e-9;
inline constexpr int kDefaultNewtonIterations = 50;

/// Raw partial derivatives d^N f^k / dx^a ... dx^c restricted to `ranges`.
/// Rank is order + 1: the output-state index k, then `order` input indices.
struct DerivativeTensorBatch {
  int order = 0;
  std::size_t n_states = 0;
  std::size_t ordinal = 0;
  std::size_t total = 1;
  std::vector<IndexRange> ranges;
  RealTensor values;
  std::vector<std::string> warnings;
};

// --- evaluation ------------------------------------------------------------

std::vector<double> eval_field(const SystemModel& model, std::span<const double> x);

/// Exact Jacobian at x as an n x n tensor.
RealTensor jacobian(const SystemModel& model, std::span<const double> x);

double field_residual(const SystemModel& model, std::span<const double> x);

EquilibriumPoint solve_equilibrium(const SystemModel& model, std::span<const double> guess,
                                   double tol = kDefaultEquilibriumTolerance,
                                   int max_iter = kDefaultNewtonIterations);

/// Throws EquilibriumError if the field residual at x exceeds tol.
EquilibriumPoint verify_equilibrium(const SystemModel& model, std::span<const double> x,
                                    double tol = kDefaultEquilibriumTolerance);

/// Declared equilibrium if present and valid, else Newton from the declared
/// point (or the origin).
EquilibriumPoint equilibrium_for(const SystemDefinition& def,
                                 double tol = kDefaultEquilibriumTolerance);

// --- derivative providers --------------------------------------------------

/// Ranges covering the whole order-N tensor of an n-state model.
std::vector<IndexRange> full_ranges(std::size_t n_states, int order);

/// Analytic derivatives (multinomial rule for polynomials, the sine
/// derivative 4-cycle for networks). Exact for any order.
DerivativeTensorBatch derivative_batch_exact(const SystemModel& model, const EquilibriumPoint& eq,
                                             int order, std::span<const IndexRange> ranges);

struct FdStepPolicy {
  // Multiplies the default step eps^(1/(N+4)) * max(1, |x_a|).
  double scale = 1.0;
};

inline constexpr int kMaxFiniteDifferenceOrder = 4;

/// Black-box nested central differences with one Richardson step, one
/// stencil per unordered index tuple (mixed partials are symmetric). Orders 1..4.
DerivativeTensorBatch derivative_batch_fd(const SystemModel& model, const EquilibriumPoint& eq,
                                          int order, std::span<const IndexRange> ranges,
                                          FdStepPolicy policy = {});

// --- random systems ----------------------------------------------------------

struct RandomPolyOptions {
  std::size_t n = 4;
  unsigned max_degree = 2;
  double density = 0.5;
  std::uint64_t seed = 1;
  double stability_margin = 0.1;
};

/// Deterministic for a fixed seed. The linear part is shifted so every
/// eigenvalue has real part <= -stability_margin; no constant terms, so the
/// origin is an equilibrium.
PolynomialSystem gen_random_poly(const RandomPolyOptions& options);

// --- system-definition documents ----------------------------------------------

SystemDefinition parse_system(std::string_view document);
SystemDefinition load_system_file(const std::filesystem::path& path);
std::string system_to_json(const SystemDefinition& def);

}  // namespace npfkit
