#pragma once

// Scenario configuration: a single JSON document, validated up front with line-numbered errors.
//
//   {
//     "scenario": "equivariance",
//     "seed": 1,
//     "grid": {"lower": [-25], "upper": [25], "points": [1024], "boundary": "periodic"},
//     "potential": {"type": "free"},
//     "constants": {"hbar": 1, "masses": [1]},
//     "initial_state": {"generator": "gaussian", "center": [0], "width": [1], "momentum": [0.7]},
//     "ensemble_size": 10000, "dt": 0.001, "dt_ode": 0.01, "t_final": 1, "stride": 10,
//     "parameters": {"bins": 50}
//   }

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bohm/errors.hpp"
#include "bohm/grid.hpp"
#include "bohm/guidance.hpp"
#include "bohm/propagate.hpp"
#include "json.hpp"

namespace bohm::config {

using nlohmann::json;

// Line of the key a JSON pointer ends in, found by scanning the source for each key in turn.
// Array indices are skipped, so the line is that of the enclosing key. 0 when nothing matches.
inline std::size_t line_of(const std::string& text, const std::string& pointer) {
  if (pointer.empty() || pointer == "/") return 0;
  std::size_t pos = 0;
  std::size_t start = 1;
  bool found = false;
  while (start <= pointer.size()) {
    std::size_t end = pointer.find('/', start);
    if (end == std::string::npos) end = pointer.size();
    std::string seg = pointer.substr(start, end - start);
    start = end + 1;
    if (!seg.empty() && std::all_of(seg.begin(), seg.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    for (std::size_t k; (k = seg.find("~1")) != std::string::npos;) seg.replace(k, 2, "/");
    for (std::size_t k; (k = seg.find("~0")) != std::string::npos;) seg.replace(k, 2, "~");
    const std::string needle = '"' + seg + '"';
    std::size_t at = pos;
    for (;;) {
      at = text.find(needle, at);
      if (at == std::string::npos) return found ? 1 + std::count(text.begin(), text.begin() + pos, '\n') : 0;
      std::size_t k = at + needle.size();
      while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
      if (k < text.size() && text[k] == ':') break;
      ++at;
    }
    pos = at;
    found = true;
  }
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class Source {
 public:
  explicit Source(std::string text) : text_(std::move(text)) {}
  const std::string& text() const { return text_; }

  [[noreturn]] void fail(const std::string& pointer, const std::string& what) const {
    throw ConfigError((pointer.empty() ? std::string() : pointer + ": ") + what, line_of(text_, pointer));
  }

  const json& at(const json& obj, const std::string& ptr, const std::string& key) const {
    if (!obj.contains(key)) fail(ptr, "missing required key '" + key + "'");
    return obj.at(key);
  }

  double number(const json& v, const std::string& ptr) const {
    if (!v.is_number()) fail(ptr, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(ptr, "expected a finite number");
    return x;
  }
  double positive(const json& v, const std::string& ptr) const {
    const double x = number(v, ptr);
    if (!(x > 0.0)) fail(ptr, "must be positive");
    return x;
  }
  std::uint64_t count(const json& v, const std::string& ptr, std::uint64_t min = 1) const {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      fail(ptr, "expected a non-negative integer");
    const auto n = v.get<std::uint64_t>();
    if (n < min) fail(ptr, "must be at least " + std::to_string(min));
    return n;
  }
  std::string string(const json& v, const std::string& ptr) const {
    if (!v.is_string()) fail(ptr, "expected a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const json& v, const std::string& ptr, std::optional<std::size_t> size = {}) const {
    if (!v.is_array()) fail(ptr, "expected an array of numbers");
    if (size && v.size() != *size) fail(ptr, "expected " + std::to_string(*size) + " entries, got " + std::to_string(v.size()));
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(number(v[k], ptr + "/" + std::to_string(k)));
    return out;
  }
  Complex complex(const json& v, const std::string& ptr) const {
    if (v.is_number()) return number(v, ptr);
    const auto p = numbers(v, ptr, 2);
    return {p[0], p[1]};
  }
  void only(const json& obj, const std::string& ptr, const std::set<std::string>& allowed) const {
    if (!obj.is_object()) fail(ptr, "expected an object");
    for (const auto& [k, _] : obj.items())
      if (!allowed.count(k)) fail(ptr + "/" + k, "unknown key '" + k + "'");
  }

 private:
  std::string text_;
};

// --- initial-state generators -------------------------------------------------------------------

struct GeneratorInfo {
  const char* name;
  const char* description;
};

inline const std::vector<GeneratorInfo>& generators() {
  static const std::vector<GeneratorInfo> g{
      {"gaussian", "product Gaussian: center, width (std of |psi|^2), momentum per axis"},
      {"gaussian-superposition", "sum of weighted Gaussian components"},
      {"coherent", "harmonic-oscillator coherent state: center, momentum; width from hbar, m, omega"},
      {"coupled-oscillator-ground", "pi^-1/2 exp(-(x^2+y^2)/2) on a 2D grid"},
      {"pointer-superposition", "system branches at -/+offset times a pointer packet at y=0"},
      {"spinor-gaussian", "Gaussian spatial profile times spinor (up, down)"},
  };
  return g;
}

inline bool is_generator(const std::string& name) {
  const auto& g = generators();
  return std::any_of(g.begin(), g.end(), [&](const GeneratorInfo& i) { return name == i.name; });
}

// Spatial Gaussian exp(-(x-c)^2/(4 w^2) + i p x / hbar), per axis product.
inline Complex gaussian_value(const std::vector<double>& x, const std::vector<double>& c, const std::vector<double>& w,
                              const std::vector<double>& p, double hbar) {
  Complex e{};
  for (std::size_t k = 0; k < x.size(); ++k)
    e += -(x[k] - c[k]) * (x[k] - c[k]) / (4.0 * w[k] * w[k]) + kI * p[k] * x[k] / hbar;
  return std::exp(e);
}

struct GaussianSpec {
  Complex weight{1.0};
  std::vector<double> center, width, momentum;
};

inline GaussianSpec read_gaussian(const Source& src, const json& s, const std::string& ptr, std::size_t dim, bool weighted) {
  std::set<std::string> keys{"center", "width", "momentum"};
  if (weighted) keys.insert("weight");
  if (!weighted) keys.insert("generator");
  src.only(s, ptr, keys);
  GaussianSpec g;
  if (weighted && s.contains("weight")) g.weight = src.complex(s["weight"], ptr + "/weight");
  g.center = src.numbers(src.at(s, ptr, "center"), ptr + "/center", dim);
  g.width = src.numbers(src.at(s, ptr, "width"), ptr + "/width", dim);
  for (std::size_t k = 0; k < dim; ++k)
    if (!(g.width[k] > 0.0)) src.fail(ptr + "/width/" + std::to_string(k), "must be positive");
  g.momentum = s.contains("momentum") ? src.numbers(s["momentum"], ptr + "/momentum", dim) : std::vector<double>(dim, 0.0);
  return g;
}

inline std::vector<double> point_of(const Grid& g, std::size_t p) {
  std::vector<double> x(g.dimension());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = g.coord(p, k);
  return x;
}

// Builds the normalized initial state. Throws ConfigError (via src) for bad parameters.
inline ScalarWaveFunction build_state(const Source& src, const json& s, const std::string& ptr, const Grid& grid,
                                      const PhysicalConstants& c, const Potential& v) {
  const std::string gen = src.string(src.at(s, ptr, "generator"), ptr + "/generator");
  const std::size_t d = grid.dimension();
  ComplexField f(grid.size());
  if (gen == "gaussian") {
    const auto g = read_gaussian(src, s, ptr, d, false);
    for (std::size_t p = 0; p < f.size(); ++p) f[p] = gaussian_value(point_of(grid, p), g.center, g.width, g.momentum, c.hbar);
  } else if (gen == "gaussian-superposition") {
    src.only(s, ptr, {"generator", "components"});
    const json& comps = src.at(s, ptr, "components");
    if (!comps.is_array() || comps.empty()) src.fail(ptr + "/components", "expected a non-empty array");
    std::vector<GaussianSpec> parts;
    for (std::size_t k = 0; k < comps.size(); ++k)
      parts.push_back(read_gaussian(src, comps[k], ptr + "/components/" + std::to_string(k), d, true));
    for (std::size_t p = 0; p < f.size(); ++p) {
      const auto x = point_of(grid, p);
      for (const auto& g : parts) f[p] += g.weight * gaussian_value(x, g.center, g.width, g.momentum, c.hbar);
    }
  } else if (gen == "coherent") {
    src.only(s, ptr, {"generator", "center", "momentum"});
    const auto* h = std::get_if<potential::Harmonic>(&v);
    if (!h) src.fail(ptr + "/generator", "coherent states need a harmonic potential");
    GaussianSpec g;
    g.center = src.numbers(src.at(s, ptr, "center"), ptr + "/center", d);
    g.momentum = s.contains("momentum") ? src.numbers(s["momentum"], ptr + "/momentum", d) : std::vector<double>(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      if (!(h->omega[k] > 0.0)) src.fail("/potential/omega", "coherent states need positive frequencies");
      g.width.push_back(std::sqrt(c.hbar / (2.0 * c.mass(k) * h->omega[k])));
    }
    for (std::size_t p = 0; p < f.size(); ++p) f[p] = gaussian_value(point_of(grid, p), g.center, g.width, g.momentum, c.hbar);
  } else if (gen == "coupled-oscillator-ground") {
    src.only(s, ptr, {"generator"});
    if (d != 2) src.fail(ptr + "/generator", "needs a 2D grid");
    for (std::size_t p = 0; p < f.size(); ++p) {
      const double x = grid.coord(p, 0), y = grid.coord(p, 1);
      f[p] = std::exp(-(x * x + y * y) / 2.0) / std::sqrt(std::numbers::pi);
    }
    // The closed form is already normalized; keep it exact.
    return ScalarWaveFunction(grid, std::move(f));
  } else if (is_generator(gen)) {
    src.fail(ptr + "/generator", "generator '" + gen + "' does not produce a scalar state here");
  } else {
    src.fail(ptr + "/generator", "unknown generator '" + gen + "'");
  }
  ScalarWaveFunction psi(grid, std::move(f));
  if (!(norm(psi) > 0.0)) src.fail(ptr, "initial state vanishes on the grid");
  return normalized(std::move(psi));
}

// --- the configuration --------------------------------------------------------------------------

enum class Param { Number, Positive, Count, Probability, NumberList, Vector3, Surface };

struct ParamSpec {
  std::string name;
  Param kind;
  json fallback;  // null: required
};

struct ScenarioSchema {
  std::string name;
  std::string description;
  std::set<std::string> required;
  std::set<std::string> optional;
  std::vector<ParamSpec> parameters;
};

struct ScenarioConfig {
  std::string scenario;
  std::uint64_t seed = 0;
  std::optional<Grid> grid;
  Potential potential = potential::Free{};
  PhysicalConstants constants;
  json initial_state;
  std::size_t ensemble_size = 0;
  double dt = 0.0;
  double dt_ode = 0.0;
  double t_final = 0.0;
  std::size_t stride = 1;
  std::optional<PropagatorMethod> method;
  NodePolicy node_policy = NodePolicy::halt();
  std::string output;
  json parameters = json::object();
  json document;  // canonical form: the input after overrides, with parameter defaults filled in
  std::shared_ptr<const Source> source;

  PropagatorMethod propagator() const { return method.value_or(default_method(*grid)); }
  double number(const std::string& k) const { return parameters.at(k).get<double>(); }
  std::size_t count(const std::string& k) const { return parameters.at(k).get<std::size_t>(); }
  std::vector<double> numbers(const std::string& k) const { return parameters.at(k).get<std::vector<double>>(); }
  ScalarWaveFunction initial(const PhysicalConstants& c) const {
    return build_state(*source, initial_state, "/initial_state", *grid, c, potential);
  }
  ScalarWaveFunction initial() const { return initial(constants); }
};

inline const std::set<std::string>& top_level_keys() {
  static const std::set<std::string> k{"scenario", "description", "seed",   "grid",   "potential",   "constants",
                                       "initial_state", "ensemble_size", "dt", "dt_ode", "t_final", "stride",
                                       "method",        "node_policy",   "output", "parameters"};
  return k;
}

inline Grid read_grid(const Source& src, const json& g) {
  src.only(g, "/grid", {"lower", "upper", "points", "boundary"});
  const json& lo = src.at(g, "/grid", "lower");
  if (!lo.is_array() || lo.empty() || lo.size() > kMaxDimension) src.fail("/grid/lower", "expected 1 or 2 entries");
  const std::size_t d = lo.size();
  const auto lower = src.numbers(lo, "/grid/lower", d);
  const auto upper = src.numbers(src.at(g, "/grid", "upper"), "/grid/upper", d);
  const json& pts = src.at(g, "/grid", "points");
  if (!pts.is_array() || pts.size() != d) src.fail("/grid/points", "expected " + std::to_string(d) + " entries");
  Boundary b = Boundary::Periodic;
  if (g.contains("boundary")) {
    const auto s = src.string(g["boundary"], "/grid/boundary");
    if (s == "boxed")
      b = Boundary::Boxed;
    else if (s != "periodic")
      src.fail("/grid/boundary", "expected 'periodic' or 'boxed'");
  }
  std::vector<Axis> axes;
  for (std::size_t k = 0; k < d; ++k) {
    const auto n = src.count(pts[k], "/grid/points/" + std::to_string(k), 8);
    if (!(upper[k] > lower[k])) src.fail("/grid/upper/" + std::to_string(k), "upper must exceed lower");
    axes.push_back(Axis::span(lower[k], upper[k], n, b));
  }
  return Grid(std::move(axes));
}

inline Potential read_potential(const Source& src, const json& v, const Grid& grid) {
  const std::string type = src.string(src.at(v, "/potential", "type"), "/potential/type");
  Potential out;
  if (type == "free") {
    src.only(v, "/potential", {"type"});
    out = potential::Free{};
  } else if (type == "harmonic") {
    src.only(v, "/potential", {"type", "omega"});
    out = potential::Harmonic{src.numbers(src.at(v, "/potential", "omega"), "/potential/omega", grid.dimension())};
  } else if (type == "coupled-oscillator") {
    src.only(v, "/potential", {"type", "kappa"});
    out = potential::CoupledOscillator{src.positive(src.at(v, "/potential", "kappa"), "/potential/kappa")};
  } else if (type == "soft-coulomb") {
    src.only(v, "/potential", {"type", "softening"});
    out = potential::SoftCoulomb{src.positive(src.at(v, "/potential", "softening"), "/potential/softening")};
  } else {
    src.fail("/potential/type", "unknown potential type '" + type + "'");
  }
  try {
    check_potential(out, grid);
  } catch (const PreconditionError& e) {
    src.fail("/potential", e.what());
  }
  return out;
}

inline void fill_parameters(const Source& src, json& params, const std::vector<ParamSpec>& specs) {
  std::set<std::string> names;
  for (const auto& s : specs) names.insert(s.name);
  src.only(params, "/parameters", names);
  for (const auto& s : specs) {
    const std::string ptr = "/parameters/" + s.name;
    if (!params.contains(s.name)) {
      if (s.fallback.is_null()) src.fail("/parameters", "missing required parameter '" + s.name + "'");
      params[s.name] = s.fallback;
    }
    const json& v = params[s.name];
    switch (s.kind) {
      case Param::Number: src.number(v, ptr); break;
      case Param::Positive: src.positive(v, ptr); break;
      case Param::Count: src.count(v, ptr); break;
      case Param::Probability: {
        const double p = src.number(v, ptr);
        if (!(p > 0.0 && p < 1.0)) src.fail(ptr, "must lie in (0, 1)");
        break;
      }
      case Param::NumberList:
        if (src.numbers(v, ptr).empty()) src.fail(ptr, "must not be empty");
        break;
      case Param::Vector3: src.numbers(v, ptr, 3); break;
      case Param::Surface: {
        src.only(v, ptr, {"location", "t0", "t1", "orientation"});
        src.number(src.at(v, ptr, "location"), ptr + "/location");
        const double t0 = src.number(src.at(v, ptr, "t0"), ptr + "/t0");
        const double t1 = src.number(src.at(v, ptr, "t1"), ptr + "/t1");
        if (!(t1 > t0)) src.fail(ptr + "/t1", "surface needs t0 < t1");
        if (v.contains("orientation")) {
          const json& o = v["orientation"];
          if (!o.is_number_integer() || (o.get<int>() != 1 && o.get<int>() != -1))
            src.fail(ptr + "/orientation", "must be +1 or -1");
        }
        break;
      }
    }
  }
}

// Steps of size dt covering t, or a ConfigError at ptr.
inline std::size_t whole_steps(const Source& src, double t, double dt, const std::string& ptr) {
  const double n = std::round(t / dt);
  if (std::abs(n * dt - t) > 1e-9 * std::max(1.0, t)) src.fail(ptr, "must be a whole number of time steps dt");
  return static_cast<std::size_t>(n);
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
};

// Parses and validates against the scenario's schema. `lookup` maps a scenario name to its schema.
inline ScenarioConfig parse(std::string text, const std::function<const ScenarioSchema*(const std::string&)>& lookup,
                            const Overrides& over = {}) {
  auto src = std::make_shared<const Source>(std::move(text));
  json doc;
  try {
    doc = json::parse(src->text());
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, src->text().size());
    const auto line = 1 + static_cast<std::size_t>(std::count(src->text().begin(), src->text().begin() + static_cast<std::ptrdiff_t>(byte > 0 ? byte - 1 : 0), '\n'));
    std::string what = e.what();
    if (auto k = what.find("syntax error"); k != std::string::npos) what = what.substr(k);
    throw ConfigError("invalid JSON: " + what, line);
  }
  if (!doc.is_object()) throw ConfigError("the configuration must be a JSON object", 1);
  src->only(doc, "", top_level_keys());

  ScenarioConfig cfg;
  cfg.source = src;
  cfg.scenario = src->string(src->at(doc, "", "scenario"), "/scenario");
  const ScenarioSchema* schema = lookup(cfg.scenario);
  if (!schema) src->fail("/scenario", "unknown scenario '" + cfg.scenario + "' (see 'bohmsim list')");
  for (const auto& k : schema->required)
    if (!doc.contains(k)) src->fail("", "scenario '" + cfg.scenario + "' requires key '" + k + "'");
  for (const auto& [k, _] : doc.items())
    if (k != "scenario" && k != "description" && k != "seed" && k != "output" && k != "parameters" && !schema->required.count(k) &&
        !schema->optional.count(k))
      src->fail("/" + k, "key '" + k + "' is not used by scenario '" + cfg.scenario + "'");

  cfg.seed = src->count(src->at(doc, "", "seed"), "/seed", 0);
  if (over.seed) {
    cfg.seed = *over.seed;
    doc["seed"] = *over.seed;
  }

  if (doc.contains("grid")) cfg.grid = read_grid(*src, doc["grid"]);
  if (doc.contains("constants")) {
    const json& c = doc["constants"];
    src->only(c, "/constants", {"hbar", "masses"});
    const std::size_t d = cfg.grid ? cfg.grid->dimension() : 1;
    cfg.constants.hbar = c.contains("hbar") ? src->positive(c["hbar"], "/constants/hbar") : 1.0;
    cfg.constants.masses = c.contains("masses") ? src->numbers(c["masses"], "/constants/masses", d) : std::vector<double>(d, 1.0);
    for (std::size_t k = 0; k < d; ++k)
      if (!(cfg.constants.masses[k] > 0.0)) src->fail("/constants/masses/" + std::to_string(k), "must be positive");
  } else if (cfg.grid) {
    cfg.constants = PhysicalConstants::natural(cfg.grid->dimension());
  }
  if (doc.contains("potential")) {
    if (!cfg.grid) src->fail("/potential", "a potential needs a grid");
    cfg.potential = read_potential(*src, doc["potential"], *cfg.grid);
  }
  if (doc.contains("method")) {
    const auto m = parse_method(src->string(doc["method"], "/method"));
    if (!m) src->fail("/method", "expected 'split-fourier' or 'crank-nicolson'");
    try {
      check_method(*m, *cfg.grid);
    } catch (const Error& e) {
      src->fail("/method", e.what());
    }
    cfg.method = m;
  }
  if (doc.contains("dt")) cfg.dt = src->positive(doc["dt"], "/dt");
  if (doc.contains("dt_ode")) cfg.dt_ode = src->positive(doc["dt_ode"], "/dt_ode");
  if (doc.contains("t_final")) {
    cfg.t_final = src->positive(doc["t_final"], "/t_final");
    if (cfg.dt > 0.0) whole_steps(*src, cfg.t_final, cfg.dt, "/t_final");
  }
  if (doc.contains("stride")) cfg.stride = src->count(doc["stride"], "/stride");
  if (doc.contains("ensemble_size")) cfg.ensemble_size = src->count(doc["ensemble_size"], "/ensemble_size");
  if (doc.contains("node_policy")) {
    const json& p = doc["node_policy"];
    src->only(p, "/node_policy", {"action", "relative_threshold", "max_speed"});
    const std::string action = p.contains("action") ? src->string(p["action"], "/node_policy/action") : "halt";
    const double rel = p.contains("relative_threshold") ? src->number(p["relative_threshold"], "/node_policy/relative_threshold") : 1e-12;
    if (rel < 0.0) src->fail("/node_policy/relative_threshold", "must be non-negative");
    if (action == "halt") {
      cfg.node_policy = NodePolicy::halt(rel);
    } else if (action == "cap-speed") {
      cfg.node_policy = NodePolicy::cap_speed(src->positive(src->at(p, "/node_policy", "max_speed"), "/node_policy/max_speed"), rel);
    } else {
      src->fail("/node_policy/action", "expected 'halt' or 'cap-speed'");
    }
  }
  if (doc.contains("initial_state")) {
    cfg.initial_state = doc["initial_state"];
    if (!cfg.initial_state.is_object()) src->fail("/initial_state", "expected an object");
    const auto gen = src->string(src->at(cfg.initial_state, "/initial_state", "generator"), "/initial_state/generator");
    if (!is_generator(gen)) src->fail("/initial_state/generator", "unknown generator '" + gen + "'");
  }
  json params = doc.contains("parameters") ? doc["parameters"] : json::object();
  fill_parameters(*src, params, schema->parameters);
  cfg.parameters = params;
  doc["parameters"] = params;

  cfg.output = doc.contains("output") ? src->string(doc["output"], "/output") : "out/" + cfg.scenario;
  if (over.output) cfg.output = *over.output;
  doc.erase("output");
  cfg.document = doc;
  return cfg;
}

}  // namespace bohm::config
