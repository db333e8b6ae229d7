#pragma once

// Binary shard files for derivative tensor batches.
//
//   "NPFT" | u16 version | u8 dtype | u8 rank | u32 n_states | u8 order |
//   u32 ordinal | u32 total | rank x (u64 start, u64 end) |
//   payload (row-major, little-endian, complex as re/im) |
//   u64 FNV-1a checksum of the payload bytes
//
// All integers are little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "npfkit/npf_engine.hpp"

namespace npfkit {

inline constexpr std::uint16_t kShardVersion = 1;

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

struct ShardHeader {
  std::uint16_t version = kShardVersion;
  DType dtype = DType::real64;
  int order = 0;
  std::size_t n_states = 0;
  std::size_t ordinal = 0;
  std::size_t total = 1;
  std::vector<IndexRange> ranges;

  std::size_t payload_bytes() const;
};

std::string encode_shard(const DerivativeTensorBatch& batch);

/// Throws InputError on malformed input and ChecksumError on a payload
/// checksum mismatch.
DerivativeTensorBatch decode_shard(std::span<const unsigned char> bytes);
ShardHeader decode_shard_header(std::span<const unsigned char> bytes);

void write_shard(const std::filesystem::path& path, const DerivativeTensorBatch& batch);
DerivativeTensorBatch read_shard(const std::filesystem::path& path);
ShardHeader read_shard_header(const std::filesystem::path& path);

/// "A{order}_b{ordinal}.npft"
std::string shard_filename(int order, std::size_t ordinal);

/// Order-M shards stored in a directory. Headers are read eagerly; payloads
/// on load().
class DiskShards final : public ShardSet {
 public:
  DiskShards(std::filesystem::path dir, int order);

  int order() const override { return order_; }
  std::size_t n_states() const override { return n_states_; }
  std::size_t count() const override { return files_.size(); }
  std::vector<IndexRange> ranges(std::size_t ordinal) const override;
  DerivativeTensorBatch load(std::size_t ordinal) const override;

 private:
  int order_;
  std::size_t n_states_ = 0;
  std::vector<std::filesystem::path> files_;
  std::vector<std::vector<IndexRange>> ranges_;
};

ShardCatalog disk_catalog(const std::filesystem::path& dir);

/// Generates the order-M shards of `plan` and writes them into `dir`.
/// Returns the number of files written.
std::size_t save_shards(const SystemModel& model, const EquilibriumPoint& eq, int order,
                        const BatchPlan& plan, const std::filesystem::path& dir,
                        DerivativeProvider provider = DerivativeProvider::exact);

}  // namespace npfkit
