#include "npfkit/results_io.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace npfkit {

using nlohmann::json;

namespace {

json entry_block(const NpfResult& r, const ComplexTensor& block) {
  json modes = json::array();
  for (std::size_t s = 0; s < r.modes.size(); ++s) {
    json values = json::array();
    for (std::size_t e = 0; e < r.states.size(); ++e) {
      const complex_t v = block({s, e});
      values.push_back({{"state", r.states[e]}, {"re", v.real()}, {"im", v.imag()}, {"abs", std::abs(v)}});
    }
    modes.push_back({{"mode", r.modes[s]},
                     {"eigenvalue", {{"re", r.eigenvalues[s].real()}, {"im", r.eigenvalues[s].imag()}}},
                     {"values", std::move(values)}});
  }
  return modes;
}

void append_rows(std::vector<ResultRow>& rows, const std::string& order, const json& modes, const std::string& where) {
  if (!modes.is_array()) throw ParseError(where, "expected an array of modes");
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const auto& mode = modes[m];
    const std::string at = fmt::format("{}/{}", where, m);
    if (!mode.contains("mode") || !mode.contains("values")) throw ParseError(at, "mode entry needs 'mode' and 'values'");
    for (std::size_t v = 0; v < mode["values"].size(); ++v) {
      const auto& x = mode["values"][v];
      const std::string vat = fmt::format("{}/values/{}", at, v);
      try {
        rows.push_back({order, mode["mode"].get<std::size_t>(), x.at("state").get<std::size_t>(),
                        x.at("abs").get<double>(), x.at("re").get<double>(), x.at("im").get<double>()});
      } catch (const json::exception& e) {
        throw ParseError(vat, e.what());
      }
    }
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw InputError(fmt::format("failed writing {}", path.string()));
}

}  // namespace

ResultFormat parse_result_format(const std::string& text) {
  if (text == "json") return ResultFormat::json;
  if (text == "csv") return ResultFormat::csv;
  throw ArgumentError("output format must be 'json' or 'csv', got '" + text + "'");
}

std::vector<ResultRow> result_rows(const NpfResult& r) {
  std::vector<ResultRow> rows;
  auto add = [&](const std::string& order, const ComplexTensor& block) {
    for (std::size_t s = 0; s < r.modes.size(); ++s) {
      for (std::size_t e = 0; e < r.states.size(); ++e) {
        const complex_t v = block({s, e});
        rows.push_back({order, r.modes[s], r.states[e], std::abs(v), v.real(), v.imag()});
      }
    }
  };
  add("1", r.linear);
  for (std::size_t m = 0; m < r.higher.size(); ++m) add(std::to_string(m + 2), r.higher[m]);
  add("total", r.total);
  return rows;
}

void normalize_rows(std::vector<ResultRow>& rows) {
  std::map<std::pair<std::string, std::size_t>, double> peak;
  for (const auto& row : rows) {
    double& p = peak[{row.order, row.mode}];
    p = std::max(p, row.abs);
  }
  for (auto& row : rows) {
    const double p = peak[{row.order, row.mode}];
    if (p > 0.0) {
      row.abs /= p;
      row.re /= p;
      row.im /= p;
    }
  }
}

std::string results_to_json(const NpfResult& r, const ResultContext& ctx) {
  json doc;
  doc["system"] = ctx.system;
  doc["n"] = ctx.n_states;
  doc["method"] = r.method;
  doc["delta"] = r.delta;
  doc["epsilon"] = r.epsilon;
  doc["max_order"] = r.max_order;
  doc["correction"] = to_string(r.correction);
  json orders = json::array();
  orders.push_back({{"order", 1}, {"modes", entry_block(r, r.linear)}});
  for (std::size_t m = 0; m < r.higher.size(); ++m) {
    orders.push_back({{"order", m + 2}, {"modes", entry_block(r, r.higher[m])}});
  }
  doc["orders"] = std::move(orders);
  doc["totals"] = entry_block(r, r.total);
  if (ctx.include_meta) {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    json stats = json::array();
    for (const auto& s : r.stats) {
      stats.push_back({{"order", s.order},
                       {"batches", s.batches},
                       {"per_batch_bytes", s.per_batch_bytes},
                       {"budget_bytes", s.budget_bytes},
                       {"peak_workspace_bytes", s.peak_workspace_bytes}});
    }
    doc["meta"] = {{"generator", "npfkit"}, {"created_unix", secs}, {"stats", std::move(stats)}};
  }
  return doc.dump(2) + "\n";
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
  std::string out = "order,mode,state,abs,re,im\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{:.17g},{:.17g},{:.17g}\n", r.order, r.mode, r.state, r.abs, r.re, r.im);
  }
  return out;
}

std::vector<ResultRow> rows_from_json(const std::string& document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("byte {}", e.byte), e.what());
  }
  if (!doc.is_object() || !doc.contains("orders") || !doc.contains("totals")) {
    throw ParseError("/", "results document needs 'orders' and 'totals'");
  }
  std::vector<ResultRow> rows;
  const auto& orders = doc["orders"];
  for (std::size_t k = 0; k < orders.size(); ++k) {
    const auto& o = orders[k];
    if (!o.contains("order") || !o["order"].is_number_integer()) throw ParseError(fmt::format("/orders/{}", k), "missing order");
    append_rows(rows, std::to_string(o["order"].get<int>()), o["modes"], fmt::format("/orders/{}/modes", k));
  }
  append_rows(rows, "total", doc["totals"], "/totals");
  return rows;
}

void write_results(const NpfResult& result, const std::filesystem::path& path, ResultFormat format,
                   const ResultContext& ctx, bool normalize) {
  if (format == ResultFormat::json) {
    write_text(path, results_to_json(result, ctx));
    return;
  }
  auto rows = result_rows(result);
  if (normalize) normalize_rows(rows);
  write_text(path, rows_to_csv(rows));
}

void convert_results(const std::filesystem::path& json_path, const std::filesystem::path& csv_path,
                     bool normalize) {
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open {}", json_path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto rows = rows_from_json(buffer.str());
  if (normalize) normalize_rows(rows);
  write_text(csv_path, rows_to_csv(rows));
}

}  // namespace npfkit
