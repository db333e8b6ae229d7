#pragma once

// Baseline methods used as oracles and benchmark references.
//
// T  evaluates the normal-form sums with explicit nested loops and shares no
//    contraction code with tensor.hpp, so it can falsify the engine.
// TC runs the contraction pipeline unbatched with every tensor materialized,
//    including the full denominator tensor.

#include <cstddef>

#include "npfkit/deadline.hpp"
#include "npfkit/modal.hpp"
#include "npfkit/npf_engine.hpp"
#include "npfkit/system_model.hpp"

namespace npfkit {

inline constexpr int kMaxTraditionalOrder = 4;

struct ReferenceOptions {
  std::size_t max_states = 12;  // size guard for T
  Deadline deadline;
};

/// hM for all modes from a full order-M derivative tensor (rank M+1).
/// Throws MemoryLimitError above the size guard.
HTensor h_traditional(int order, const RealTensor& derivatives, const ModalBasis& basis,
                      double epsilon, const ReferenceOptions& options = {});

/// Method T. Supports raw and corrected modes, orders up to 4.
NpfResult npf_traditional(const SystemModel& model, const EquilibriumPoint& eq,
                          const ModalBasis& basis, const ModeSubset& modes,
                          const EngineConfig& cfg, const Excitation& exc,
                          const ReferenceOptions& options = {});

/// Full tensor bytes TC needs for its largest order: n^(N+1) complex entries.
wide_uint tc_tensor_bytes(std::size_t n_states, int max_order);

/// Method TC. Throws MemoryLimitError when the full tensors exceed
/// cfg.memory_limit_gib.
NpfResult npf_tc_unbatched(const SystemModel& model, const EquilibriumPoint& eq,
                           const ModalBasis& basis, const ModeSubset& modes,
                           const EngineConfig& cfg, const Excitation& exc);

}  // namespace npfkit
