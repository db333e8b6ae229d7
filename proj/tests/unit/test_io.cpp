#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "helpers.hpp"
#include "npfkit/results_io.hpp"
#include "npfkit/shard_io.hpp"
#include "npfkit/validate.hpp"

using namespace npfkit;
using namespace npfkit::test;

namespace {

std::span<const unsigned char> bytes_of(const std::string& s) {
  return {reinterpret_cast<const unsigned char*>(s.data()), s.size()};
}

DerivativeTensorBatch sample_batch() {
  const PolynomialSystem sys = gen_random_poly({4, 3, 0.8, 17, 0.1});
  const EquilibriumPoint eq{std::vector<double>(4, 0.0), 0.0};
  const BatchPlan plan = plan_batches({4, 4, 200.0 / kBytesPerGiB, 8});
  auto b = derivative_batch_exact(sys, eq, 3, batch_ranges(plan, 1));
  b.ordinal = 1;
  b.total = static_cast<std::size_t>(plan.batches);
  return b;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

NpfResult sample_result() {
  const SystemDefinition def = three_machine_example();
  const EquilibriumPoint eq = equilibrium_for(def);
  const ModalBasis b = decompose(jacobian(def.model, eq.x));
  EngineConfig cfg;
  cfg.max_order = 3;
  return compute_npf(def.model, eq, b, all_modes(6), cfg, Excitation::all(0.1));
}

}  // namespace

TEST_CASE("shard encoding round-trips exactly") {
  const DerivativeTensorBatch b = sample_batch();
  const std::string enc = encode_shard(b);
  const DerivativeTensorBatch back = decode_shard(bytes_of(enc));
  CHECK(back.order == 3);
  CHECK(back.n_states == 4);
  CHECK(back.ordinal == 1);
  CHECK(back.total == b.total);
  CHECK(back.ranges == b.ranges);
  CHECK(back.values == b.values);
  const ShardHeader h = decode_shard_header(bytes_of(enc));
  CHECK(enc.size() == 4 + 2 + 1 + 1 + 4 + 1 + 4 + 4 + 16 * h.ranges.size() + h.payload_bytes() + 8);
  CHECK(enc.substr(0, 4) == "NPFT");
}

TEST_CASE("corrupt and truncated shards are rejected") {
  const std::string enc = encode_shard(sample_batch());
  std::string flipped = enc;
  flipped[enc.size() - 20] ^= 0x01;
  CHECK_THROWS_AS(decode_shard(bytes_of(flipped)), ChecksumError);
  CHECK_THROWS_AS(decode_shard(bytes_of(enc.substr(0, enc.size() - 3))), InputError);
  CHECK_THROWS_AS(decode_shard(bytes_of(enc.substr(0, 10))), InputError);
  std::string magic = enc;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_shard(bytes_of(magic)), InputError);
  std::string version = enc;
  version[4] = 9;
  CHECK_THROWS_AS(decode_shard(bytes_of(version)), InputError);
}

TEST_CASE("shard directories") {
  CHECK(shard_filename(3, 12) == "A3_b12.npft");
  const auto dir = std::filesystem::temp_directory_path() / "npfkit_unit_shards";
  std::filesystem::remove_all(dir);
  const PolynomialSystem sys = gen_random_poly({4, 2, 0.8, 5, 0.1});
  const EquilibriumPoint eq{std::vector<double>(4, 0.0), 0.0};
  const BatchPlan plan = plan_batches({3, 4, 100.0 / kBytesPerGiB, 8});
  const std::size_t written = save_shards(sys, eq, 2, plan, dir);
  CHECK(written == static_cast<std::size_t>(plan.batches));
  const DiskShards disk(dir, 2);
  CHECK(disk.count() == written);
  CHECK_NOTHROW(verify_partition(disk));
  for (std::size_t i = 0; i < disk.count(); ++i) CHECK(disk.ranges(i) == batch_ranges(plan, i));
  std::filesystem::remove(dir / shard_filename(2, 1));
  CHECK_THROWS_AS(DiskShards(dir, 2), CoverageError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("JSON and CSV carry the same digits") {
  const NpfResult r = sample_result();
  const ResultContext ctx{"three-machine", 6, false};
  const std::string json = results_to_json(r, ctx);
  const auto rows = rows_from_json(json);
  const auto direct = result_rows(r);
  REQUIRE(rows.size() == direct.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].order == direct[i].order);
    CHECK(rows[i].abs == direct[i].abs);
    CHECK(rows[i].re == direct[i].re);
    CHECK(rows[i].im == direct[i].im);
  }
  CHECK(rows_to_csv(rows) == rows_to_csv(direct));
  CHECK(rows_to_csv(direct).rfind("order,mode,state,abs,re,im\n", 0) == 0);
  CHECK(json.find("\"meta\"") == std::string::npos);
  CHECK(results_to_json(r, {"three-machine", 6, true}).find("\"meta\"") != std::string::npos);
  CHECK(results_to_json(r, ctx) == json);
  CHECK_THROWS_AS(rows_from_json("{\"orders\": 3}"), ParseError);
  CHECK_THROWS_AS(rows_from_json("not json"), ParseError);
}

TEST_CASE("normalization scales each order and mode group to unit peak") {
  auto rows = result_rows(sample_result());
  normalize_rows(rows);
  std::map<std::pair<std::string, std::size_t>, double> peak;
  for (const auto& r : rows) {
    auto& p = peak[{r.order, r.mode}];
    p = std::max(p, r.abs);
    CHECK(std::abs(std::hypot(r.re, r.im) - r.abs) < 1e-12);
  }
  for (const auto& [key, p] : peak) CHECK((p == doctest::Approx(1.0) || p == 0.0));
}

TEST_CASE("file conversion matches direct CSV output") {
  const NpfResult r = sample_result();
  const auto dir = std::filesystem::temp_directory_path() / "npfkit_unit_results";
  std::filesystem::create_directories(dir);
  const ResultContext ctx{"three-machine", 6, true};
  write_results(r, dir / "r.json", ResultFormat::json, ctx);
  write_results(r, dir / "r.csv", ResultFormat::csv, ctx);
  convert_results(dir / "r.json", dir / "c.csv");
  CHECK(read_file(dir / "r.csv") == read_file(dir / "c.csv"));
  write_results(r, dir / "n.csv", ResultFormat::csv, ctx, true);
  convert_results(dir / "r.json", dir / "nc.csv", true);
  CHECK(read_file(dir / "n.csv") == read_file(dir / "nc.csv"));
  CHECK_THROWS_AS(parse_result_format("xml"), ArgumentError);
  std::filesystem::remove_all(dir);
}
