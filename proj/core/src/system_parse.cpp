// System-definition documents (JSON).
//
//   {"name": "...", "type": "polynomial", "n": 2,
//    "terms": [{"k": 0, "c": -1.0, "x": [[0, 1]]}, ...],
//    "equilibrium": [0, 0]}
//
//   {"name": "...", "type": "sine_network", "m": 3,
//    "params": {"inertia": [...], "damping": [...], "power": [...],
//               "voltage": [...], "coupling": [[...], ...],
//               "infinite_bus": [...]}}
//
// Scalar params are broadcast to every machine; a scalar coupling fills the
// off-diagonal entries.

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "npfkit/system_model.hpp"

namespace npfkit {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ParseError(where.empty() ? "/" : where, what);
}

const json& require(const json& obj, const std::string& where, const char* key) {
  if (!obj.is_object()) fail(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(where, fmt::format("missing field '{}'", key));
  return *it;
}

std::size_t as_index(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(where, "expected a non-negative integer");
  return v.get<std::size_t>();
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  return v.get<double>();
}

std::vector<double> machine_vector(const json& params, const std::string& where, const char* key,
                                   std::size_t m, std::optional<double> fallback) {
  auto it = params.find(key);
  const std::string at = where + "/" + key;
  if (it == params.end()) {
    if (fallback) return std::vector<double>(m, *fallback);
    fail(where, fmt::format("missing field '{}'", key));
  }
  if (it->is_number()) return std::vector<double>(m, it->get<double>());
  if (!it->is_array() || it->size() != m) fail(at, fmt::format("expected a number or {} numbers", m));
  std::vector<double> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back(as_number((*it)[i], fmt::format("{}/{}", at, i)));
  return out;
}

PolynomialSystem parse_polynomial(const json& doc) {
  const std::size_t n = as_index(require(doc, "", "n"), "/n");
  if (n == 0) fail("/n", "state count must be positive");
  const json& terms = require(doc, "", "terms");
  if (!terms.is_array()) fail("/terms", "expected an array");
  std::vector<PolynomialTerm> out;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const std::string at = fmt::format("/terms/{}", t);
    const json& term = terms[t];
    PolynomialTerm pt;
    pt.target = as_index(require(term, at, "k"), at + "/k");
    if (pt.target >= n) fail(at + "/k", fmt::format("state {} out of range for n = {}", pt.target, n));
    pt.coefficient = as_number(require(term, at, "c"), at + "/c");
    const json& factors = require(term, at, "x");
    if (!factors.is_array()) fail(at + "/x", "expected an array of [state, power] pairs");
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const std::string fat = fmt::format("{}/x/{}", at, f);
      const json& pair = factors[f];
      if (!pair.is_array() || pair.size() != 2) fail(fat, "expected [state, power]");
      const std::size_t state = as_index(pair[0], fat + "/0");
      const std::size_t power = as_index(pair[1], fat + "/1");
      if (state >= n) fail(fat + "/0", fmt::format("state {} out of range for n = {}", state, n));
      if (power < 1) fail(fat + "/1", "power must be >= 1");
      pt.factors.push_back({state, static_cast<unsigned>(power)});
    }
    out.push_back(std::move(pt));
  }
  return PolynomialSystem(n, std::move(out));
}

SineNetwork parse_sine_network(const json& doc) {
  SineNetwork net;
  net.machines = as_index(require(doc, "", "m"), "/m");
  if (net.machines == 0) fail("/m", "machine count must be positive");
  const json& params = require(doc, "", "params");
  if (!params.is_object()) fail("/params", "expected an object");
  const std::size_t m = net.machines;
  net.inertia = machine_vector(params, "/params", "inertia", m, std::nullopt);
  net.damping = machine_vector(params, "/params", "damping", m, 0.0);
  net.power = machine_vector(params, "/params", "power", m, std::nullopt);
  net.voltage = machine_vector(params, "/params", "voltage", m, 1.0);
  net.infinite_bus = machine_vector(params, "/params", "infinite_bus", m, 0.0);

  const json& coupling = require(params, "/params", "coupling");
  net.coupling.assign(m, std::vector<double>(m, 0.0));
  if (coupling.is_number()) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) net.coupling[i][j] = i == j ? 0.0 : coupling.get<double>();
    }
  } else {
    if (!coupling.is_array() || coupling.size() != m) {
      fail("/params/coupling", fmt::format("expected a number or a {0} x {0} matrix", m));
    }
    for (std::size_t i = 0; i < m; ++i) {
      const std::string row = fmt::format("/params/coupling/{}", i);
      if (!coupling[i].is_array() || coupling[i].size() != m) fail(row, fmt::format("expected {} numbers", m));
      for (std::size_t j = 0; j < m; ++j) {
        net.coupling[i][j] = as_number(coupling[i][j], fmt::format("{}/{}", row, j));
      }
    }
  }
  try {
    net.validate();
  } catch (const ArgumentError& e) {
    fail("/params", e.what());
  }
  return net;
}

}  // namespace

SystemDefinition parse_system(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("byte {}", e.byte), "malformed JSON");
  }
  if (!doc.is_object()) fail("", "system definition must be a JSON object");

  SystemDefinition def;
  if (auto it = doc.find("name"); it != doc.end()) {
    if (!it->is_string()) fail("/name", "expected a string");
    def.name = it->get<std::string>();
  }
  const json& type = require(doc, "", "type");
  if (!type.is_string()) fail("/type", "expected a string");
  const std::string kind = type.get<std::string>();
  if (kind == "polynomial") {
    def.model = parse_polynomial(doc);
  } else if (kind == "sine_network") {
    def.model = parse_sine_network(doc);
  } else {
    fail("/type", fmt::format("unknown system type '{}'", kind));
  }

  if (auto it = doc.find("equilibrium"); it != doc.end()) {
    const std::size_t n = state_count(def.model);
    if (!it->is_array() || it->size() != n) fail("/equilibrium", fmt::format("expected {} numbers", n));
    std::vector<double> x;
    for (std::size_t i = 0; i < n; ++i) x.push_back(as_number((*it)[i], fmt::format("/equilibrium/{}", i)));
    def.equilibrium = std::move(x);
  }
  return def;
}

SystemDefinition load_system_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open system file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_system(buffer.str());
}

std::string system_to_json(const SystemDefinition& def) {
  json doc;
  doc["name"] = def.name;
  if (const auto* sys = std::get_if<PolynomialSystem>(&def.model)) {
    doc["type"] = "polynomial";
    doc["n"] = sys->n_states();
    json terms = json::array();
    for (const auto& t : sys->terms()) {
      json x = json::array();
      for (const auto& f : t.factors) x.push_back({f.state, f.power});
      terms.push_back({{"k", t.target}, {"c", t.coefficient}, {"x", x}});
    }
    doc["terms"] = terms;
  } else {
    const auto& net = std::get<SineNetwork>(def.model);
    doc["type"] = "sine_network";
    doc["m"] = net.machines;
    doc["params"] = {{"inertia", net.inertia},   {"damping", net.damping},
                     {"power", net.power},       {"voltage", net.voltage},
                     {"coupling", net.coupling}, {"infinite_bus", net.infinite_bus}};
  }
  if (def.equilibrium) doc["equilibrium"] = *def.equilibrium;
  return doc.dump(2);
}

}  // namespace npfkit
