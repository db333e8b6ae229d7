#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "npfkit/npf_engine.hpp"

namespace npfkit {

struct BenchRecord {
  std::string system;
  std::size_t n = 0;
  int order = 0;
  std::string method;              // T, TC or VBT
  double seconds = 0.0;
  std::size_t batches = 1;
  double per_batch_seconds = 0.0;  // seconds / batches of the top order
  std::size_t peak_bytes = 0;      // tracked workspace (VBT) or materialized tensors (T, TC)
  std::string status;              // ok, memory-fail, timeout
  std::string hash;                // empty unless status is ok
};

struct BenchOptions {
  std::vector<std::size_t> sizes = {4, 6};
  std::vector<int> orders = {2, 3};
  std::vector<std::string> methods = {"T", "TC", "VBT"};
  double timeout_seconds = 600.0;
  double limit_gib = 8.0;
  std::uint64_t seed = 1;
  double density = 0.5;
  std::size_t t_max_states = 20;
  std::size_t workers = 1;
};

/// FNV-1a over the bytes of every order block, as 16 hex digits.
std::string result_hash(const NpfResult& result);

/// One cell on the seeded random system of size n and degree `order`.
BenchRecord bench_cell(std::size_t n, int order, const std::string& method, const BenchOptions& options);

/// Cells in (size, order, method) order, run sequentially.
std::vector<BenchRecord> run_bench(const BenchOptions& options);

std::string bench_csv(const std::vector<BenchRecord>& records);

}  // namespace npfkit
