#include "config.hpp"

#include "pdecay/errors.hpp"
#include "pdecay/verify.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace pdecay::cli {

namespace {

template <typename T>
T get(const nlohmann::json& doc, const char* key) {
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

double RunConfig::effective_slack() const {
  if (slack) return *slack;
  return backend == "grid" ? grid_slack : 1e-8;
}

RunConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw UsageError("config must be a JSON object");
  static const std::set<std::string> known{
      "backend", "m",    "quad-nodes", "potential", "interval",   "n",     "seed",
      "family",  "count", "p",         "t-points",  "t-end",      "slack", "grid-slack",
      "c-p",     "out",  "sweep",      "extra-bounds"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw UsageError("unknown config field '" + key + "'");
  }
  RunConfig c;
  if (doc.contains("backend")) c.backend = get<std::string>(doc, "backend");
  if (doc.contains("m")) c.m = get<int>(doc, "m");
  if (doc.contains("quad-nodes")) c.quad_nodes = get<int>(doc, "quad-nodes");
  if (doc.contains("potential")) c.potential = get<std::string>(doc, "potential");
  if (doc.contains("interval")) {
    const auto v = get<std::vector<double>>(doc, "interval");
    if (v.size() != 2) throw UsageError("config field 'interval' needs two numbers");
    c.interval = std::pair{v[0], v[1]};
  }
  if (doc.contains("n")) c.n = get<int>(doc, "n");
  if (doc.contains("seed")) c.seed = get<std::uint64_t>(doc, "seed");
  if (doc.contains("family")) c.family = get<std::string>(doc, "family");
  if (doc.contains("count")) c.count = get<int>(doc, "count");
  if (doc.contains("p")) c.p = get<std::vector<double>>(doc, "p");
  if (doc.contains("t-points")) c.t_points = get<int>(doc, "t-points");
  if (doc.contains("t-end")) c.t_end = get<double>(doc, "t-end");
  if (doc.contains("slack")) c.slack = get<double>(doc, "slack");
  if (doc.contains("grid-slack")) c.grid_slack = get<double>(doc, "grid-slack");
  if (doc.contains("c-p")) c.c_p = get<double>(doc, "c-p");
  if (doc.contains("out")) c.out = get<std::string>(doc, "out");
  if (doc.contains("sweep")) {
    const auto& sweep = doc.at("sweep");
    c.sweep_axis = get<std::string>(sweep, "axis");
    c.sweep_values = get<std::vector<double>>(sweep, "values");
  }
  if (doc.contains("extra-bounds")) {
    for (const auto& b : doc.at("extra-bounds")) {
      const std::string source = b.contains("source") ? get<std::string>(b, "source") : "probe";
      try {
        c.extra_bounds.push_back(make_bound(get<double>(b, "p"), get<double>(b, "lambda"),
                                            get<double>(b, "K"), bound_source_from_string(source)));
      } catch (const std::logic_error& e) {
        throw UsageError(std::string("extra bound: ") + e.what());
      }
    }
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["backend"] = c.backend;
  if (c.backend == "ou") {
    j["m"] = c.m;
    j["quad-nodes"] = c.quad_nodes > 0 ? c.quad_nodes : 8 * c.m;
  } else {
    j["potential"] = c.potential;
    j["n"] = c.n;
    if (c.interval) j["interval"] = {c.interval->first, c.interval->second};
  }
  j["seed"] = c.seed;
  j["family"] = c.family;
  j["count"] = c.count;
  j["p"] = c.p;
  j["t-points"] = c.t_points;
  j["t-end"] = c.t_end;
  j["slack"] = c.effective_slack();
  nlohmann::json extra = nlohmann::json::array();
  for (const auto& b : c.extra_bounds) extra.push_back(pdecay::to_json(b));
  j["extra-bounds"] = std::move(extra);
  return j;
}

void validate(const RunConfig& c) {
  if (c.backend != "ou" && c.backend != "grid") {
    throw UsageError("backend must be 'ou' or 'grid', got '" + c.backend + "'");
  }
  if (c.m < 2) throw UsageError("m must be >= 2");
  if (c.quad_nodes != 0 && c.quad_nodes < 2 * c.m) throw UsageError("quad-nodes must be >= 2 m");
  if (c.n < 3) throw UsageError("n must be >= 3");
  if (c.count < 3) throw UsageError("count must be >= 3");
  for (double p : c.p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw UsageError("every p must be > 1");
  }
  if (c.t_points < 2) throw UsageError("time grid needs at least 2 points");
  if (!(c.t_end >= 0.0)) throw UsageError("t-end must be >= 0");
  if (c.slack && !(*c.slack >= 0.0)) throw UsageError("slack must be >= 0");
  if (!(c.grid_slack >= 0.0)) throw UsageError("grid-slack must be >= 0");
  if (c.c_p && !(*c.c_p > 0.0)) throw UsageError("c-p must be > 0");
  try {
    family_kind_from_string(c.family);
  } catch (const PreconditionError& e) {
    throw UsageError(e.what());
  }
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError("not a number: '" + item + "'");
    }
    if (used != item.size()) throw UsageError("not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

DecayBound parse_bound(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ':')) parts.push_back(item);
  if (parts.size() != 3 && parts.size() != 4) {
    throw UsageError("bound must look like p:lambda:K[:source], got '" + text + "'");
  }
  std::vector<double> v;
  for (int i = 0; i < 3; ++i) {
    const auto one = parse_real_list(parts[static_cast<std::size_t>(i)]);
    if (one.size() != 1) throw UsageError("bad number in bound '" + text + "'");
    v.push_back(one[0]);
  }
  try {
    const BoundSource source =
        parts.size() == 4 ? bound_source_from_string(parts[3]) : BoundSource::probe;
    return make_bound(v[0], v[1], v[2], source);
  } catch (const std::logic_error& e) {
    throw UsageError(std::string("bound '") + text + "': " + e.what());
  }
}

Potential parse_potential(const std::string& text,
                          const std::optional<std::pair<double, double>>& interval) {
  Potential out;
  out.name = text;
  std::pair<double, double> range{-8.0, 8.0};
  if (text == "gaussian") {
    out.v = [](double x) { return 0.5 * x * x; };
    out.continuum_gap = 1.0;
  } else if (text == "uniform") {
    out.v = [](double) { return 0.0; };
    range = {0.0, 1.0};
  } else if (text == "quartic") {
    out.v = [](double x) { return 0.25 * x * x * x * x; };
    range = {-4.0, 4.0};
  } else if (text == "double-well") {
    out.v = [](double x) { return 0.25 * x * x * x * x - 0.5 * x * x; };
    range = {-4.0, 4.0};
  } else if (text.rfind("poly:", 0) == 0) {
    const std::vector<double> c = parse_real_list(text.substr(5));
    if (c.empty()) throw UsageError("poly potential needs coefficients");
    out.v = [c](double x) {
      double acc = 0.0;
      for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
      return acc;
    };
    range = {-4.0, 4.0};
  } else {
    throw UsageError("unknown potential '" + text + "'");
  }
  if (interval) range = *interval;
  if (!(range.first < range.second)) throw UsageError("interval must satisfy a < b");
  out.a = range.first;
  out.b = range.second;
  if (text == "uniform") {
    const double length = out.b - out.a;
    out.continuum_gap = std::numbers::pi * std::numbers::pi / (length * length);
  }
  return out;
}

GeneratorRep build_backend(const RunConfig& c) {
  try {
    if (c.backend == "ou") return build_ou_hermite(c.m, c.quad_nodes > 0 ? c.quad_nodes : 8 * c.m);
    const Potential v = parse_potential(c.potential, c.interval);
    return build_grid_generator(build_grid_space(v.v, v.a, v.b, c.n));
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConstructionError(std::string("backend construction failed: ") + e.what());
  }
}

nlohmann::json describe_backend(const RunConfig& c) {
  nlohmann::json j;
  j["kind"] = c.backend;
  if (c.backend == "ou") {
    j["m"] = c.m;
    j["quad-nodes"] = c.quad_nodes > 0 ? c.quad_nodes : 8 * c.m;
  } else {
    const Potential v = parse_potential(c.potential, c.interval);
    j["potential"] = v.name;
    j["interval"] = {v.a, v.b};
    j["n"] = c.n;
  }
  return j;
}

}  // namespace pdecay::cli
