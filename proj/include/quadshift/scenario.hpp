#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "quadshift/errors.hpp"
#include "quadshift/model.hpp"
#include "quadshift/propagator.hpp"

namespace quadshift {

using json = nlohmann::json;

struct TimeWindow {
  double t0 = 0.0;
  double t_end = 1.0;
  double dt = 1e-3;
  std::size_t output_stride = 1;
};

struct OutputSelection {
  bool series = true;
  std::vector<double> snapshots;
  bool verify_position = true;
  bool verify_momentum = true;
  int max_moment_order = 6;
};

/// Pass/fail thresholds for verify. Moment deltas are absolute differences.
struct Tolerances {
  double residual = 1e-4;
  double moment = 1e-8;
  double norm = 1e-9;
  double leak = 1e-6;
};

/// One unit of CLI work, fully resolved (defaults filled in).
struct Scenario {
  std::string name;
  Grid grid{-20.0, 20.0, 1024};
  TimeWindow time;
  CoefficientSet coefficients;
  GaussianPacketSpec packet;
  PhysicalParams params;
  Discretization discretization;
  OutputSelection outputs;
  Tolerances tolerances;

  EvolveOptions evolve_options() const {
    EvolveOptions o;
    o.t_end = time.t_end;
    o.dt = time.dt;
    o.output_stride = time.output_stride;
    o.snapshot_times = outputs.snapshots;
    o.discretization = discretization;
    o.leak_threshold = tolerances.leak;
    return o;
  }
};

namespace config {

inline constexpr int schema_version = 1;

inline std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

inline void reject_unknown(const json& obj, const std::string& where,
                           std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) throw ConfigError(join(where, key), "unknown field");
  }
}

inline double number(const json& obj, const std::string& where, const char* key,
                     std::optional<double> fallback = std::nullopt) {
  const std::string field = join(where, key);
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(field, "required field is missing");
  }
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(field, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(field, "must be finite");
  return d;
}

inline long long integer(const json& obj, const std::string& where, const char* key,
                         std::optional<long long> fallback = std::nullopt) {
  const std::string field = join(where, key);
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(field, "required field is missing");
  }
  const auto& v = obj.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    throw ConfigError(field, "expected an integer");
  }
  return v.get<long long>();
}

inline bool boolean(const json& obj, const std::string& where, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(join(where, key), "expected true or false");
  return v.get<bool>();
}

inline CoefficientFunction parse_coefficient(const json& j, const std::string& where,
                                             double default_start) {
  if (j.is_number()) {
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(where, "must be finite");
    return CoefficientFunction::constant(v, default_start);
  }
  reject_unknown(j, where, {"segments"});
  if (!j.contains("segments") || !j.at("segments").is_array()) {
    throw ConfigError(join(where, "segments"), "expected an array of segments");
  }
  std::vector<Segment> segments;
  std::size_t idx = 0;
  for (const auto& sj : j.at("segments")) {
    const std::string sw = join(where, "segments[" + std::to_string(idx++) + "]");
    reject_unknown(sj, sw, {"t_start", "poly", "sin"});
    Segment seg;
    seg.t_start = number(sj, sw, "t_start", default_start);
    if (sj.contains("poly")) {
      const auto& pj = sj.at("poly");
      if (!pj.is_array() || pj.size() > 4) {
        throw ConfigError(join(sw, "poly"), "expected up to four numbers [c0, c1, c2, c3]");
      }
      for (std::size_t i = 0; i < pj.size(); ++i) {
        if (!pj[i].is_number()) throw ConfigError(join(sw, "poly"), "expected numbers");
        seg.poly[i] = pj[i].get<double>();
      }
    }
    if (sj.contains("sin")) {
      const auto& wj = sj.at("sin");
      if (!wj.is_array()) throw ConfigError(join(sw, "sin"), "expected an array");
      std::size_t widx = 0;
      for (const auto& term : wj) {
        const std::string tw = join(sw, "sin[" + std::to_string(widx++) + "]");
        reject_unknown(term, tw, {"amp", "omega", "phase"});
        seg.sines.push_back(
            {number(term, tw, "amp"), number(term, tw, "omega"), number(term, tw, "phase", 0.0)});
      }
    }
    segments.push_back(std::move(seg));
  }
  try {
    return CoefficientFunction(std::move(segments));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where, e.what());
  }
}

inline json coefficient_to_json(const CoefficientFunction& fn) {
  json segments = json::array();
  for (const auto& s : fn.segments()) {
    json sines = json::array();
    for (const auto& w : s.sines) {
      sines.push_back({{"amp", w.amplitude}, {"omega", w.omega}, {"phase", w.phase}});
    }
    segments.push_back({{"t_start", s.t_start},
                        {"poly", {s.poly[0], s.poly[1], s.poly[2], s.poly[3]}},
                        {"sin", sines}});
  }
  return {{"segments", segments}};
}

inline Scheme parse_scheme(const std::string& s, const std::string& field) {
  if (s == "exponential-midpoint") return Scheme::exponential_midpoint;
  if (s == "crank-nicolson") return Scheme::crank_nicolson;
  throw ConfigError(field, "unknown scheme '" + s +
                               "' (expected exponential-midpoint or crank-nicolson)");
}

}  // namespace config

/// Parses and validates a schema-1 scenario document. Errors name the field.
inline Scenario parse_scenario(const json& doc) {
  using namespace config;
  reject_unknown(doc, "", {"schema", "name", "hbar", "grid", "propagator", "time",
                           "coefficients", "packet", "outputs", "tolerances"});
  if (!doc.contains("schema")) throw ConfigError("schema", "required field is missing");
  if (integer(doc, "", "schema") != schema_version) {
    throw ConfigError("schema", "unsupported schema version (expected 1)");
  }

  Scenario sc;
  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) throw ConfigError("name", "expected a string");
    sc.name = doc.at("name").get<std::string>();
  }

  sc.params.hbar = number(doc, "", "hbar", 1.0);
  if (!(sc.params.hbar > 0.0)) throw ConfigError("hbar", "must be > 0");

  // grid
  if (!doc.contains("grid")) throw ConfigError("grid", "required section is missing");
  const auto& gj = doc.at("grid");
  reject_unknown(gj, "grid", {"x_min", "x_max", "n"});
  const double x_min = number(gj, "grid", "x_min");
  const double x_max = number(gj, "grid", "x_max");
  const long long n = integer(gj, "grid", "n");
  if (n < 64 || (n & (n - 1)) != 0) throw ConfigError("grid.n", "must be a power of two >= 64");
  if (!(x_max > x_min)) throw ConfigError("grid.x_max", "must exceed grid.x_min");
  sc.grid = Grid(x_min, x_max, static_cast<std::size_t>(n));

  // propagator
  if (doc.contains("propagator")) {
    const auto& pj = doc.at("propagator");
    reject_unknown(pj, "propagator", {"scheme", "stencil_order"});
    const long long order =
        integer(pj, "propagator", "stencil_order", sc.discretization.stencil_order);
    if (order < 2 || order > 12 || order % 2 != 0) {
      throw ConfigError("propagator.stencil_order", "must be an even number in [2, 12]");
    }
    sc.discretization.stencil_order = static_cast<int>(order);
    if (pj.contains("scheme")) {
      if (!pj.at("scheme").is_string()) {
        throw ConfigError("propagator.scheme", "expected a string");
      }
      sc.discretization.scheme =
          parse_scheme(pj.at("scheme").get<std::string>(), "propagator.scheme");
    }
  }

  // time
  if (!doc.contains("time")) throw ConfigError("time", "required section is missing");
  const auto& tj = doc.at("time");
  reject_unknown(tj, "time", {"t0", "t_end", "dt", "output_stride"});
  sc.time.t0 = number(tj, "time", "t0", 0.0);
  sc.time.t_end = number(tj, "time", "t_end");
  sc.time.dt = number(tj, "time", "dt");
  const long long stride = integer(tj, "time", "output_stride", 1);
  if (!(sc.time.t_end > sc.time.t0)) throw ConfigError("time.t_end", "must exceed time.t0");
  if (!(sc.time.dt > 0.0)) throw ConfigError("time.dt", "must be > 0");
  if (stride < 1) throw ConfigError("time.output_stride", "must be >= 1");
  sc.time.output_stride = static_cast<std::size_t>(stride);

  // coefficients
  if (!doc.contains("coefficients")) {
    throw ConfigError("coefficients", "required section is missing");
  }
  const auto& cj = doc.at("coefficients");
  reject_unknown(cj, "coefficients", {"a", "b", "c", "f", "g"});
  if (!cj.contains("a")) throw ConfigError("coefficients.a", "required field is missing");
  auto coefficient = [&](const char* key) {
    return cj.contains(key)
               ? parse_coefficient(cj.at(key), join("coefficients", key), sc.time.t0)
               : CoefficientFunction{};
  };
  sc.coefficients.a = coefficient("a");
  sc.coefficients.b = coefficient("b");
  sc.coefficients.c = coefficient("c");
  sc.coefficients.f = coefficient("f");
  sc.coefficients.g = coefficient("g");
  sc.coefficients.t0 = sc.time.t0;
  const std::pair<const char*, const CoefficientFunction*> named[] = {
      {"a", &sc.coefficients.a}, {"b", &sc.coefficients.b}, {"c", &sc.coefficients.c},
      {"f", &sc.coefficients.f}, {"g", &sc.coefficients.g}};
  for (const auto& [key, fn] : named) {
    if (fn->domain_start() > sc.time.t0) {
      throw ConfigError(join("coefficients", key), "not defined at time.t0");
    }
  }
  // a(t) > 0 on every step end point and midpoint of the window.
  const auto times = time_lattice(sc.time.t0, sc.time.t_end, sc.time.dt);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double probe[2] = {times[k], k + 1 < times.size() ? 0.5 * (times[k] + times[k + 1])
                                                              : times[k]};
    for (double t : probe) {
      if (!(sc.coefficients.a(t) > 0.0)) {
        throw ConfigError("coefficients.a", "must be positive (fails at t=" + std::to_string(t) +
                                                ")");
      }
    }
  }

  // packet
  if (doc.contains("packet")) {
    const auto& pj = doc.at("packet");
    reject_unknown(pj, "packet", {"x0", "p0", "sigma", "hermite_n", "chirp"});
    sc.packet.x0 = number(pj, "packet", "x0", 0.0);
    sc.packet.p0 = number(pj, "packet", "p0", 0.0);
    sc.packet.sigma = number(pj, "packet", "sigma", 1.0);
    const long long order = integer(pj, "packet", "hermite_n", 0);
    sc.packet.chirp = number(pj, "packet", "chirp", 0.0);
    if (!(sc.packet.sigma > 0.0)) throw ConfigError("packet.sigma", "must be > 0");
    if (order < 0 || order > GaussianPacketSpec::max_hermite_order) {
      throw ConfigError("packet.hermite_n", "must be in [0, 10]");
    }
    sc.packet.hermite_n = static_cast<int>(order);
  }

  // outputs
  if (doc.contains("outputs")) {
    const auto& oj = doc.at("outputs");
    reject_unknown(oj, "outputs", {"series", "snapshots", "verify"});
    sc.outputs.series = boolean(oj, "outputs", "series", true);
    if (oj.contains("snapshots")) {
      const auto& sj = oj.at("snapshots");
      if (!sj.is_array()) throw ConfigError("outputs.snapshots", "expected an array of times");
      for (const auto& v : sj) {
        if (!v.is_number()) throw ConfigError("outputs.snapshots", "expected numbers");
        const double t = v.get<double>();
        if (!(t >= sc.time.t0 && t <= sc.time.t_end)) {
          throw ConfigError("outputs.snapshots", "time " + std::to_string(t) +
                                                     " lies outside [time.t0, time.t_end]");
        }
        sc.outputs.snapshots.push_back(t);
      }
    }
    if (oj.contains("verify")) {
      const auto& vj = oj.at("verify");
      reject_unknown(vj, "outputs.verify", {"position", "momentum", "max_moment_order"});
      sc.outputs.verify_position = boolean(vj, "outputs.verify", "position", true);
      sc.outputs.verify_momentum = boolean(vj, "outputs.verify", "momentum", true);
      const long long order = integer(vj, "outputs.verify", "max_moment_order", 6);
      if (order < 2 || order > 12) {
        throw ConfigError("outputs.verify.max_moment_order", "must be in [2, 12]");
      }
      sc.outputs.max_moment_order = static_cast<int>(order);
    }
  }

  // tolerances
  if (doc.contains("tolerances")) {
    const auto& tj2 = doc.at("tolerances");
    reject_unknown(tj2, "tolerances", {"residual", "moment", "norm", "leak"});
    sc.tolerances.residual = number(tj2, "tolerances", "residual", sc.tolerances.residual);
    sc.tolerances.moment = number(tj2, "tolerances", "moment", sc.tolerances.moment);
    sc.tolerances.norm = number(tj2, "tolerances", "norm", sc.tolerances.norm);
    sc.tolerances.leak = number(tj2, "tolerances", "leak", sc.tolerances.leak);
    for (const char* key : {"residual", "moment", "norm", "leak"}) {
      if (!(tj2.value(key, 1.0) > 0.0)) throw ConfigError(join("tolerances", key), "must be > 0");
    }
  }
  return sc;
}

inline json load_json(const std::string& path, const std::string& what = "config") {
  std::ifstream in(path);
  if (!in) throw ConfigError(what, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(what, std::string("invalid JSON: ") + e.what());
  }
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(load_json(path)); }

/// Fully resolved scenario, every default made explicit.
inline json to_json(const Scenario& sc) {
  using config::coefficient_to_json;
  const auto& k = sc.coefficients;
  return {
      {"schema", config::schema_version},
      {"name", sc.name},
      {"hbar", sc.params.hbar},
      {"grid", {{"x_min", sc.grid.x_min()}, {"x_max", sc.grid.x_max()}, {"n", sc.grid.size()}}},
      {"propagator",
       {{"scheme", to_string(sc.discretization.scheme)},
        {"stencil_order", sc.discretization.stencil_order}}},
      {"time",
       {{"t0", sc.time.t0},
        {"t_end", sc.time.t_end},
        {"dt", sc.time.dt},
        {"output_stride", sc.time.output_stride}}},
      {"coefficients",
       {{"a", coefficient_to_json(k.a)},
        {"b", coefficient_to_json(k.b)},
        {"c", coefficient_to_json(k.c)},
        {"f", coefficient_to_json(k.f)},
        {"g", coefficient_to_json(k.g)}}},
      {"packet",
       {{"x0", sc.packet.x0},
        {"p0", sc.packet.p0},
        {"sigma", sc.packet.sigma},
        {"hermite_n", sc.packet.hermite_n},
        {"chirp", sc.packet.chirp}}},
      {"outputs",
       {{"series", sc.outputs.series},
        {"snapshots", sc.outputs.snapshots},
        {"verify",
         {{"position", sc.outputs.verify_position},
          {"momentum", sc.outputs.verify_momentum},
          {"max_moment_order", sc.outputs.max_moment_order}}}}},
      {"tolerances",
       {{"residual", sc.tolerances.residual},
        {"moment", sc.tolerances.moment},
        {"norm", sc.tolerances.norm},
        {"leak", sc.tolerances.leak}}},
  };
}

}  // namespace quadshift
