#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "npfkit/npf_engine.hpp"

namespace npfkit {

enum class ResultFormat { json, csv };

ResultFormat parse_result_format(const std::string& text);

struct ResultContext {
  std::string system;
  std::size_t n_states = 0;
  bool include_meta = true;  // generator/version block; off for byte-stable output
};

/// One flattened entry; `order` is "1".."N" or "total".
struct ResultRow {
  std::string order;
  std::size_t mode = 0;
  std::size_t state = 0;
  double abs = 0.0;
  double re = 0.0;
  double im = 0.0;
};

std::vector<ResultRow> result_rows(const NpfResult& result);

/// Scales every (order, mode) group so its largest magnitude is 1. Groups
/// that are identically zero are left alone.
void normalize_rows(std::vector<ResultRow>& rows);

std::string results_to_json(const NpfResult& result, const ResultContext& ctx);
std::string rows_to_csv(const std::vector<ResultRow>& rows);

/// Rows of a results JSON document. Throws ParseError on schema violations.
std::vector<ResultRow> rows_from_json(const std::string& document);

void write_results(const NpfResult& result, const std::filesystem::path& path, ResultFormat format,
                   const ResultContext& ctx, bool normalize = false);

/// JSON results file to CSV, magnitudes preserved exactly.
void convert_results(const std::filesystem::path& json_path, const std::filesystem::path& csv_path,
                     bool normalize = false);

}  // namespace npfkit
