#pragma once

// Batched, vectorized nonlinear participation factors.
//
// For order M the normal-form coefficients are
//
//   hM[i, a_1..a_M] = (1/M!) sum_{k, s_1..s_M} psi[i,k] AM[k, s_1..s_M]
//                     phi[s_1,a_1] ... phi[s_M,a_M]
//                     / clamp(lambda_a1 + ... + lambda_aM - lambda_i)
//
// where AM holds raw partial derivatives. Everything except the division is
// linear in AM, and the denominator depends only on modal indices, so each
// shard of AM can be pushed through the full pipeline on its own and the
// per-shard results summed. That is what lets the tensor be streamed from
// batches that never coexist in memory.

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "npfkit/batch_planner.hpp"
#include "npfkit/deadline.hpp"
#include "npfkit/modal.hpp"
#include "npfkit/system_model.hpp"
#include "npfkit/tensor.hpp"

namespace npfkit {

enum class CorrectionMode { raw, corrected };
enum class DerivativeProvider { exact, finite_difference };

std::string to_string(CorrectionMode mode);
CorrectionMode parse_correction_mode(const std::string& text);

inline constexpr double kDefaultEpsilon = 1e-8;

struct EngineConfig {
  int max_order = 2;
  double epsilon = kDefaultEpsilon;
  CorrectionMode correction = CorrectionMode::raw;
  double memory_limit_gib = 8.0;  // global; each worker plans with limit / workers
  std::size_t workers = 1;
  std::size_t mode_chunk = 0;     // leading-mode chunk width, 0 derives it from the budget
  unsigned element_bytes = 8;     // planner accounting width
  DerivativeProvider provider = DerivativeProvider::exact;
  bool inject_sign_fault = false;  // test hook: flips the sign of every higher-order term
  Deadline deadline;

  void validate() const;
};

struct Excitation {
  enum class Kind { single, all_states };

  Kind kind = Kind::all_states;
  std::size_t state = 0;
  double delta = 1.0;

  static Excitation single(std::size_t k, double delta) { return {Kind::single, k, delta}; }
  static Excitation all(double delta) { return {Kind::all_states, 0, delta}; }

  /// Excited states in column order.
  std::vector<std::size_t> states(std::size_t n) const;
};

/// Modal initial conditions: column e belongs to excited state states[e].
struct ModalInitialState {
  std::vector<std::size_t> states;
  double delta = 1.0;
  ComplexTensor zeta;       // n x n_exc
  ComplexTensor zeta_star;  // equals zeta until corrected
  int correction_order = 0;
};

struct HTensor {
  int order = 0;
  double epsilon = kDefaultEpsilon;
  std::vector<std::size_t> modes;  // leading-index rows
  ComplexTensor values;            // |modes| x n x ... x n
};

/// Shards of one order-M derivative tensor that partition its index space.
/// load() must be safe to call concurrently for distinct ordinals.
class ShardSet {
 public:
  virtual ~ShardSet() = default;
  virtual int order() const = 0;
  virtual std::size_t n_states() const = 0;
  virtual std::size_t count() const = 0;
  virtual std::vector<IndexRange> ranges(std::size_t ordinal) const = 0;
  virtual DerivativeTensorBatch load(std::size_t ordinal) const = 0;
};

/// Shards generated on demand from a model according to a batch plan.
class GeneratedShards final : public ShardSet {
 public:
  GeneratedShards(const SystemModel& model, const EquilibriumPoint& eq, int order, BatchPlan plan,
                  DerivativeProvider provider = DerivativeProvider::exact);

  int order() const override { return order_; }
  std::size_t n_states() const override { return state_count(*model_); }
  std::size_t count() const override { return static_cast<std::size_t>(plan_.batches); }
  std::vector<IndexRange> ranges(std::size_t ordinal) const override;
  DerivativeTensorBatch load(std::size_t ordinal) const override;

  const BatchPlan& plan() const noexcept { return plan_; }

 private:
  const SystemModel* model_;
  const EquilibriumPoint* eq_;
  int order_;
  BatchPlan plan_;
  DerivativeProvider provider_;
};

/// Produces the shard set for a given order.
using ShardCatalog = std::function<std::unique_ptr<ShardSet>(int order)>;

/// Plan used by the engine for an order-M tensor: rank M+1, limit split
/// evenly across workers.
BatchPlan engine_plan(std::size_t n_states, int order, const EngineConfig& cfg);

/// Catalog generating shards from `model` under engine_plan. The model and
/// equilibrium must outlive the catalog.
ShardCatalog generated_catalog(const SystemModel& model, const EquilibriumPoint& eq,
                               const EngineConfig& cfg);

/// Throws CoverageError unless the shards tile the full n^(M+1) index space
/// exactly once.
void verify_partition(const ShardSet& shards);

struct OrderStats {
  int order = 0;
  std::size_t batches = 0;
  std::size_t per_batch_bytes = 0;
  std::size_t budget_bytes = 0;          // per worker: 4 x per_batch_bytes
  std::size_t peak_workspace_bytes = 0;  // max over workers
};

inline constexpr std::size_t kWorkspaceBudgetFactor = 4;

struct Contribution {
  ComplexTensor values;  // |modes| x n_exc
  OrderStats stats;
};

/// sum over shards of hM[modes, a_1..a_M] * prod_l vectors[a_l, e], for every
/// column e of `vectors` (n x n_exc).
Contribution stream_order_contribution(const ShardSet& shards, const ModalBasis& basis,
                                       const ModeSubset& modes, const ComplexTensor& vectors,
                                       const EngineConfig& cfg);

ModalInitialState compute_zeta(const ModalBasis& basis, const Excitation& exc);

/// zeta* = zeta - sum_{M=2..max_order} hM(zeta, ..., zeta). Raw mode returns
/// the state unchanged.
ModalInitialState correct_zeta(ModalInitialState state, const ShardCatalog& catalog,
                               const ModalBasis& basis, const EngineConfig& cfg,
                               std::vector<OrderStats>* stats = nullptr);

/// Full hM tensor. Throws MemoryLimitError if it does not fit the limit.
HTensor export_h_tensor(const ShardSet& shards, const ModalBasis& basis, const ModeSubset& modes,
                        const EngineConfig& cfg);

struct NpfResult {
  std::string method;
  std::vector<std::size_t> modes;
  std::vector<complex_t> eigenvalues;  // of the selected modes
  std::vector<std::size_t> states;     // excited states (columns)
  double delta = 1.0;
  double epsilon = kDefaultEpsilon;
  int max_order = 1;
  CorrectionMode correction = CorrectionMode::raw;

  ComplexTensor linear;               // P1: |modes| x |states|
  std::vector<ComplexTensor> higher;  // P2 ... P_max_order
  ComplexTensor total;

  std::vector<OrderStats> stats;

  /// P_order for order >= 1.
  const ComplexTensor& order(int m) const;
};

/// Assembles P1, P_M and totals from modal quantities:
///   P1[i, e]  = phi[k_e, i] * zeta*[i, e]
///   P_M[i, e] = phi[k_e, i] * contribution_M[i, e]
NpfResult assemble_result(const ModalBasis& basis, const ModeSubset& modes,
                          const ModalInitialState& state,
                          std::vector<ComplexTensor> contributions, const EngineConfig& cfg);

NpfResult compute_npf(const ShardCatalog& catalog, const ModalBasis& basis,
                      const ModeSubset& modes, const EngineConfig& cfg, const Excitation& exc);

NpfResult compute_npf(const SystemModel& model, const EquilibriumPoint& eq,
                      const ModalBasis& basis, const ModeSubset& modes, const EngineConfig& cfg,
                      const Excitation& exc);

}  // namespace npfkit
