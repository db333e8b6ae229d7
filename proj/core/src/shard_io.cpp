#include "npfkit/shard_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <regex>

#include <fmt/format.h>

namespace npfkit {

namespace {

constexpr unsigned char kMagic[4] = {'N', 'P', 'F', 'T'};
constexpr std::size_t kFixedHeader = 4 + 2 + 1 + 1 + 4 + 1 + 4 + 4;

template <typename T>
void put(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(static_cast<std::uint64_t>(value) >> (8 * i) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::span<const unsigned char> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw InputError("shard file is truncated");
  }

  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

ShardHeader parse_header(Reader& in) {
  const auto magic = in.take(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw InputError("not a shard file (bad magic)");
  ShardHeader h;
  h.version = in.get<std::uint16_t>();
  if (h.version != kShardVersion) throw InputError(fmt::format("unsupported shard version {}", h.version));
  const auto dtype = in.get<std::uint8_t>();
  if (dtype > 1) throw InputError(fmt::format("unknown shard dtype code {}", dtype));
  h.dtype = static_cast<DType>(dtype);
  const std::size_t rank = in.get<std::uint8_t>();
  h.n_states = in.get<std::uint32_t>();
  h.order = in.get<std::uint8_t>();
  h.ordinal = in.get<std::uint32_t>();
  h.total = in.get<std::uint32_t>();
  if (rank != static_cast<std::size_t>(h.order) + 1) throw InputError("shard rank does not match its order");
  if (h.n_states == 0) throw InputError("shard has zero states");
  if (h.total == 0 || h.ordinal >= h.total) throw InputError("shard ordinal out of range");
  for (std::size_t d = 0; d < rank; ++d) {
    const auto start = in.get<std::uint64_t>();
    const auto end = in.get<std::uint64_t>();
    if (start >= end || end > h.n_states) throw InputError(fmt::format("shard range {} is invalid", d));
    h.ranges.push_back({static_cast<std::size_t>(start), static_cast<std::size_t>(end)});
  }
  return h;
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open shard file {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t ShardHeader::payload_bytes() const {
  std::size_t count = 1;
  for (const auto& r : ranges) count *= r.width();
  return count * (dtype == DType::real64 ? 8 : 16);
}

std::string encode_shard(const DerivativeTensorBatch& batch) {
  const std::size_t rank = batch.ranges.size();
  if (rank != static_cast<std::size_t>(batch.order) + 1 || batch.values.rank() != rank) {
    throw DimensionError("batch rank does not match its order");
  }
  for (std::size_t d = 0; d < rank; ++d) {
    if (batch.values.extent(d) != batch.ranges[d].width()) throw DimensionError("batch values do not match ranges");
  }
  if (batch.n_states > UINT32_MAX || batch.total > UINT32_MAX || batch.order > 255) {
    throw ArgumentError("batch metadata does not fit the shard header");
  }
  std::string out(kMagic, kMagic + 4);
  put<std::uint16_t>(out, kShardVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(DType::real64));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(rank));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.n_states));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(batch.order));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.ordinal));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.total));
  for (const auto& r : batch.ranges) {
    put<std::uint64_t>(out, r.start);
    put<std::uint64_t>(out, r.end);
  }
  const std::size_t payload_at = out.size();
  for (double v : batch.values.values()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  const auto* p = reinterpret_cast<const unsigned char*>(out.data()) + payload_at;
  put<std::uint64_t>(out, fnv1a64({p, out.size() - payload_at}));
  return out;
}

ShardHeader decode_shard_header(std::span<const unsigned char> bytes) {
  Reader in(bytes);
  return parse_header(in);
}

DerivativeTensorBatch decode_shard(std::span<const unsigned char> bytes) {
  Reader in(bytes);
  const ShardHeader h = parse_header(in);
  const std::size_t payload = h.payload_bytes();
  if (in.remaining() != payload + 8) {
    throw InputError(fmt::format("shard payload is {} bytes, header implies {}", in.remaining() - std::min<std::size_t>(8, in.remaining()), payload));
  }
  const auto data = in.take(payload);
  const auto stored = in.get<std::uint64_t>();
  if (fnv1a64(data) != stored) throw ChecksumError("shard payload checksum mismatch");

  Reader values(data);
  Shape shape;
  for (const auto& r : h.ranges) shape.push_back(r.width());
  const std::size_t count = element_count(shape);
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    v[i] = std::bit_cast<double>(values.get<std::uint64_t>());
    if (h.dtype == DType::complex128) {
      const double im = std::bit_cast<double>(values.get<std::uint64_t>());
      if (im != 0.0) throw InputError("derivative shards must be real");
    }
  }
  DerivativeTensorBatch batch;
  batch.order = h.order;
  batch.n_states = h.n_states;
  batch.ordinal = h.ordinal;
  batch.total = h.total;
  batch.ranges = h.ranges;
  batch.values = RealTensor(std::move(shape), std::move(v));
  return batch;
}

void write_shard(const std::filesystem::path& path, const DerivativeTensorBatch& batch) {
  const std::string bytes = encode_shard(batch);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(fmt::format("cannot write shard file {}", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError(fmt::format("failed writing shard file {}", path.string()));
}

DerivativeTensorBatch read_shard(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  return decode_shard(bytes);
}

ShardHeader read_shard_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open shard file {}", path.string()));
  std::vector<unsigned char> head(kFixedHeader);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  if (in.gcount() != static_cast<std::streamsize>(head.size())) throw InputError("shard file is truncated");
  const std::size_t rank = head[7];
  head.resize(kFixedHeader + 16 * rank);
  in.read(reinterpret_cast<char*>(head.data() + kFixedHeader), static_cast<std::streamsize>(16 * rank));
  if (in.gcount() != static_cast<std::streamsize>(16 * rank)) throw InputError("shard file is truncated");
  return decode_shard_header(head);
}

std::string shard_filename(int order, std::size_t ordinal) { return fmt::format("A{}_b{}.npft", order, ordinal); }

DiskShards::DiskShards(std::filesystem::path dir, int order) : order_(order) {
  if (!std::filesystem::is_directory(dir)) throw InputError(fmt::format("shard directory {} not found", dir.string()));
  const std::regex pattern(fmt::format("A{}_b([0-9]+)\\.npft", order));
  std::vector<std::pair<ShardHeader, std::filesystem::path>> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, pattern)) continue;
    found.emplace_back(read_shard_header(entry.path()), entry.path());
  }
  if (found.empty()) throw InputError(fmt::format("no order-{} shards in {}", order, dir.string()));
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first.ordinal < b.first.ordinal; });
  n_states_ = found.front().first.n_states;
  const std::size_t total = found.front().first.total;
  for (std::size_t b = 0; b < found.size(); ++b) {
    const auto& h = found[b].first;
    if (h.order != order || h.n_states != n_states_ || h.total != total || h.ordinal != b) {
      throw CoverageError(fmt::format("order-{} shards in {} are inconsistent or incomplete at ordinal {}", order,
                                      dir.string(), b));
    }
    files_.push_back(found[b].second);
    ranges_.push_back(h.ranges);
  }
  if (files_.size() != total) {
    throw CoverageError(fmt::format("found {} of {} order-{} shards", files_.size(), total, order));
  }
}

std::vector<IndexRange> DiskShards::ranges(std::size_t ordinal) const { return ranges_.at(ordinal); }

DerivativeTensorBatch DiskShards::load(std::size_t ordinal) const { return read_shard(files_.at(ordinal)); }

ShardCatalog disk_catalog(const std::filesystem::path& dir) {
  return [dir](int order) -> std::unique_ptr<ShardSet> { return std::make_unique<DiskShards>(dir, order); };
}

std::size_t save_shards(const SystemModel& model, const EquilibriumPoint& eq, int order,
                        const BatchPlan& plan, const std::filesystem::path& dir,
                        DerivativeProvider provider) {
  std::filesystem::create_directories(dir);
  const GeneratedShards shards(model, eq, order, plan, provider);
  for (std::size_t b = 0; b < shards.count(); ++b) write_shard(dir / shard_filename(order, b), shards.load(b));
  return shards.count();
}

}  // namespace npfkit
