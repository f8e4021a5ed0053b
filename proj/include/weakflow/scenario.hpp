#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "weakflow/catalogue.hpp"
#include "weakflow/fields.hpp"
#include "weakflow/verify.hpp"

namespace weakflow {

using json = nlohmann::json;

inline constexpr const char* scenario_schema = "weakflow.scenario/1";
inline constexpr const char* report_schema = "weakflow.report/1";
inline constexpr const char* manifest_schema = "weakflow.manifest/1";

// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// config validation helpers

namespace cfg {

inline const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw InvalidArgument(where + "." + key + ": required");
  return j.at(key);
}

inline void keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + ": expected an object");
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) throw InvalidArgument(where + "." + k + ": unknown key");
}

inline double num(const json& j, const char* key, std::optional<double> fallback, const std::string& where) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw InvalidArgument(where + "." + key + ": required");
  }
  const auto& v = j.at(key);
  if (!v.is_number() || !std::isfinite(v.get<double>()))
    throw InvalidArgument(where + "." + key + ": expected a finite number");
  return v.get<double>();
}

inline double positive(const json& j, const char* key, std::optional<double> fallback, const std::string& where) {
  const double v = num(j, key, fallback, where);
  if (!(v > 0.0)) throw InvalidArgument(where + "." + key + ": must be positive");
  return v;
}

inline long long integer(const json& j, const char* key, std::optional<long long> fallback, const std::string& where,
                         long long min = 0) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw InvalidArgument(where + "." + key + ": required");
  }
  const auto& v = j.at(key);
  if (!v.is_number_integer() && !(v.is_number() && v.get<double>() == std::floor(v.get<double>())))
    throw InvalidArgument(where + "." + key + ": expected an integer");
  const long long x = v.is_number_integer() ? v.get<long long>() : static_cast<long long>(v.get<double>());
  if (x < min)
    throw InvalidArgument(where + "." + key + (min == 1 ? ": must be a positive integer" : ": must be >= " + std::to_string(min)));
  return x;
}

inline std::string str(const json& j, const char* key, std::optional<std::string> fallback, const std::string& where) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw InvalidArgument(where + "." + key + ": required");
  }
  if (!j.at(key).is_string()) throw InvalidArgument(where + "." + key + ": expected a string");
  return j.at(key).get<std::string>();
}

inline bool boolean(const json& j, const char* key, bool fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw InvalidArgument(where + "." + key + ": expected true or false");
  return j.at(key).get<bool>();
}

inline std::vector<double> numbers(const json& j, const char* key, std::optional<std::vector<double>> fallback,
                                   const std::string& where) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw InvalidArgument(where + "." + key + ": required");
  }
  const auto& v = j.at(key);
  if (!v.is_array()) throw InvalidArgument(where + "." + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw InvalidArgument(where + "." + key + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::vector<double> increasing(const json& j, const char* key, std::optional<std::vector<double>> fallback,
                                      const std::string& where, std::size_t min_size = 2) {
  auto v = numbers(j, key, fallback, where);
  if (v.size() < min_size)
    throw InvalidArgument(where + "." + key + ": needs at least " + std::to_string(min_size) + " entries");
  for (std::size_t k = 1; k < v.size(); ++k)
    if (!(v[k] > v[k - 1])) throw InvalidArgument(where + "." + key + ": must be strictly increasing");
  return v;
}

inline std::vector<double> ladder(const json& j, const std::string& where) {
  if (!j.contains("ladder")) return {};
  auto v = numbers(j, "ladder", std::nullopt, where);
  try {
    validate_ladder(v);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(where + ".ladder: " + e.what());
  }
  return v;
}

inline std::optional<DerivativeSide> side(const json& j, const std::string& where) {
  if (!j.contains("derivative_side")) return std::nullopt;
  try {
    return parse_derivative_side(str(j, "derivative_side", std::nullopt, where));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(where + ".derivative_side: " + e.what());
  }
}

inline Verdict verdict(const std::string& s, const std::string& where) {
  if (s == "pass") return Verdict::pass;
  if (s == "fail") return Verdict::fail;
  if (s == "inconclusive") return Verdict::inconclusive;
  throw InvalidArgument(where + ": expected pass, fail or inconclusive");
}

}  // namespace cfg

// ---------------------------------------------------------------------------
// spaces

struct BuiltSpace {
  ModelSpace model;
  std::optional<SampledSpace> sampled;
  std::string backend;

  const Space& space() const { return sampled ? static_cast<const Space&>(*sampled) : model; }
  bool analytic() const { return backend == "analytic"; }
};

inline FlowLaw parse_flow(const json& j, const std::string& where) {
  std::string law;
  double rate = 0.0;
  if (j.is_string()) {
    law = j.get<std::string>();
  } else {
    cfg::keys(j, {"law", "rate"}, where);
    law = cfg::str(j, "law", std::nullopt, where);
    if (law == "exponential" || law == "linear") rate = cfg::num(j, "rate", std::nullopt, where);
  }
  if (law == "static") return FlowLaw::stationary();
  if (law == "ricci-backward") return FlowLaw::ricci_backward();
  if (law == "exponential") return FlowLaw::exponential_scale(rate);
  if (law == "linear") return FlowLaw::linear_scale(rate);
  throw InvalidArgument(where + ": unknown flow law '" + law + "' (expected static, ricci-backward, exponential or linear)");
}

// Model (with nodes when requested) without sampling; cheap enough for validation.
inline ModelSpace build_model(const json& j, const std::string& where) {
  cfg::keys(j, {"model", "n", "size", "flow", "interval", "orientation", "backend", "nodes", "samples"}, where);
  const std::string kind = cfg::str(j, "model", std::nullopt, where);
  const int n = static_cast<int>(cfg::integer(j, "n", 2, where, 1));
  const double size = cfg::positive(j, "size", 1.0, where);
  const FlowLaw flow = j.contains("flow") ? parse_flow(j.at("flow"), where + ".flow") : FlowLaw::stationary();
  const auto iv = cfg::increasing(j, "interval", std::vector<double>{0.0, 1.0}, where);
  if (iv.size() != 2) throw InvalidArgument(where + ".interval: needs exactly two entries");
  const std::string orient = cfg::str(j, "orientation", "backward", where);
  if (orient != "backward" && orient != "forward")
    throw InvalidArgument(where + ".orientation: expected backward or forward");
  ModelOptions opts{{iv[0], iv[1]}, orient == "forward" ? Orientation::forward : Orientation::backward};
  ModelSpace m = [&] {
    if (kind == "round-sphere") return make_round_sphere(n, size, flow, opts);
    if (kind == "flat-torus") return make_flat_torus(n, size, flow, opts);
    throw InvalidArgument(where + ".model: unknown model '" + kind + "' (expected round-sphere or flat-torus)");
  }();
  const std::string backend = cfg::str(j, "backend", "analytic", where);
  if (backend == "nodes") {
    const auto count = cfg::integer(j, "nodes", std::nullopt, where, 1);
    try {
      m = m.with_nodes(static_cast<std::size_t>(count));
    } catch (const Error& e) {
      throw InvalidArgument(where + ".nodes: " + e.what());
    }
  } else if (backend == "sampled") {
    const auto& s = cfg::need(j, "samples", where);
    const std::string w = where + ".samples";
    cfg::keys(s, {"N", "strategy", "seed", "time_grid"}, w);
    if (cfg::integer(s, "N", std::nullopt, w, 1) < 2) throw InvalidArgument(w + ".N: must be at least 2");
    parse_sampling_strategy(cfg::str(s, "strategy", "quasi-uniform", w));
    if (s.contains("seed")) cfg::integer(s, "seed", std::nullopt, w, 0);
    if (s.contains("time_grid")) cfg::increasing(s, "time_grid", std::nullopt, w, 1);
  } else if (backend != "analytic") {
    throw InvalidArgument(where + ".backend: expected analytic, nodes or sampled");
  }
  if (backend != "nodes" && j.contains("nodes")) throw InvalidArgument(where + ".nodes: only valid with backend nodes");
  if (backend != "sampled" && j.contains("samples"))
    throw InvalidArgument(where + ".samples: only valid with backend sampled");
  return m;
}

inline BuiltSpace build_space(const json& j, std::uint64_t seed, const std::string& where) {
  BuiltSpace b{build_model(j, where), std::nullopt, cfg::str(j, "backend", "analytic", where)};
  if (b.backend == "sampled") {
    const auto& s = j.at("samples");
    const std::string w = where + ".samples";
    const auto count = static_cast<std::size_t>(cfg::integer(s, "N", std::nullopt, w, 1));
    const auto strategy = parse_sampling_strategy(cfg::str(s, "strategy", "quasi-uniform", w));
    const auto sseed = static_cast<std::uint64_t>(cfg::integer(s, "seed", static_cast<long long>(seed), w, 0));
    SampleOptions opts;
    if (s.contains("time_grid")) opts.time_grid = cfg::increasing(s, "time_grid", std::nullopt, w, 1);
    b.sampled = sample(b.model, count, sseed, strategy, opts);
  }
  return b;
}

// Forward-time view for heat propagation: the space itself when static or
// forward, otherwise its reversal about the interval end.
struct HeatView {
  std::shared_ptr<const Space> space;
  ModelSpace model;
};

inline HeatView heat_view(const BuiltSpace& b) {
  const Space& s = b.space();
  if (s.is_static() || s.orientation() == Orientation::forward) {
    if (b.sampled) return {std::make_shared<SampledSpace>(*b.sampled), b.model};
    return {std::make_shared<ModelSpace>(b.model), b.model};
  }
  const double anchor = s.interval().hi;
  auto model = b.model.reversed_model(anchor);
  if (b.sampled) return {std::make_shared<SampledSpace>(b.sampled->reversed_sampled(anchor)), model};
  return {std::make_shared<ModelSpace>(model), model};
}

inline CostSpec parse_cost(const json& j, const std::string& where) {
  if (j.is_string()) {
    const std::string s = j;
    if (s == "d") return CostSpec::distance();
    if (s == "d^2") return CostSpec::distance_squared();
    throw InvalidArgument(where + ": unknown cost '" + s + "' (expected d, d^2 or an object)");
  }
  cfg::keys(j, {"polynomial", "piecewise", "frozen_time"}, where);
  std::optional<CostSpec> c;
  try {
    if (j.contains("polynomial")) c = CostSpec::polynomial(cfg::numbers(j, "polynomial", std::nullopt, where));
    if (j.contains("piecewise")) {
      if (c) throw InvalidArgument("give either polynomial or piecewise");
      std::vector<std::pair<double, double>> pts;
      for (const auto& p : j.at("piecewise")) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
          throw InvalidArgument("piecewise breakpoints are [x, y] pairs");
        pts.emplace_back(p[0].get<double>(), p[1].get<double>());
      }
      c = CostSpec::piecewise(std::move(pts));
    }
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(where + ": " + e.what());
  }
  if (!c) throw InvalidArgument(where + ": needs polynomial or piecewise");
  if (j.contains("frozen_time")) c->frozen_time = cfg::num(j, "frozen_time", std::nullopt, where);
  return *c;
}

inline ChernoffSchedule parse_schedule(const json& j, OperatorKind default_kernel, const std::string& where) {
  ChernoffSchedule s;
  s.outer = static_cast<int>(cfg::integer(j, "m", 1, where, 1));
  s.inner = static_cast<int>(cfg::integer(j, "j", 1, where, 1));
  try {
    s.kernel = j.contains("kernel") ? parse_operator_kind(cfg::str(j, "kernel", std::nullopt, where)) : default_kernel;
    if (j.contains("mode")) s.mode = parse_schedule_mode(cfg::str(j, "mode", std::nullopt, where));
    s.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(where + ": " + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// cases and results

struct DataRow {
  std::string series;
  double x = 0.0;
  double value = 0.0;
};

struct Check {
  std::string name;
  double value = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  bool ok = false;
};

struct CaseOutcome {
  Verdict verdict = Verdict::pass;
  std::vector<Check> checks;
  std::vector<DataRow> rows;
  std::vector<VerdictReport> reports;
  json details = json::object();
  std::string refinement;
};

struct CaseConfig {
  std::string name;
  json space;
  json task;
  std::optional<Verdict> expect;
};

struct ScenarioConfig {
  std::string name;
  std::string description;
  std::uint64_t seed = 1;
  std::optional<std::string> output;
  std::vector<CaseConfig> cases;
  json raw;
};

struct CaseResult {
  std::string name;
  std::string task;
  Verdict verdict = Verdict::pass;
  std::optional<Verdict> expect;
  bool ok = false;
  std::string error;
  CaseOutcome outcome;
};

struct ScenarioResult {
  std::string name;
  Verdict verdict = Verdict::pass;
  bool error = false;
  int exit_code = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<CaseResult> cases;
  std::vector<std::string> warnings;
  json report;
  std::string data_csv;
  std::string refinement_csv;
  std::string witnesses_csv;
};

inline int exit_code_for(Verdict v) {
  switch (v) {
    case Verdict::pass: return 0;
    case Verdict::fail: return 2;
    case Verdict::inconclusive: return 3;
  }
  return 1;
}

namespace detail {

inline Check check_abs(std::string name, double value, double target, double tol) {
  return {std::move(name), value, target, tol, std::abs(value - target) <= tol};
}

inline Check check_rel(std::string name, double value, double target, double rel) {
  const double tol = rel * std::abs(target);
  return {std::move(name), value, target, tol, std::abs(value - target) <= tol};
}

inline Check check_max(std::string name, double value, double bound) {
  return {std::move(name), value, bound, 0.0, value <= bound};
}

inline bool all_ok(const std::vector<Check>& cs) {
  return std::all_of(cs.begin(), cs.end(), [](const Check& c) { return c.ok; });
}

inline Point parse_point(const json& j, const ModelSpace& m, const std::string& where) {
  std::vector<double> v = cfg::numbers(json{{"point", j}}, "point", std::nullopt, where);
  if (static_cast<int>(v.size()) != m.ambient_dimension())
    throw InvalidArgument(where + ": needs " + std::to_string(m.ambient_dimension()) + " coordinates");
  Point p = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
  return m.is_sphere() ? m.normalize(p) : p;
}

inline std::size_t node_index(const json& t, const char* key, const Space& s, std::size_t fallback,
                              const std::string& where) {
  const auto i = static_cast<std::size_t>(cfg::integer(t, key, static_cast<long long>(fallback), where, 0));
  if (s.size() > 0 && i >= s.size())
    throw InvalidArgument(where + "." + key + ": index " + std::to_string(i) + " out of range (N=" +
                          std::to_string(s.size()) + ")");
  return i;
}

inline double start_time(const json& t, const Space& s, const char* key, const std::string& where) {
  return cfg::num(t, key, s.interval().lo, where);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// tasks

struct TaskContext {
  const BuiltSpace* built = nullptr;
  std::uint64_t seed = 1;
  std::string where;
};

using TaskRunner = std::function<CaseOutcome(const json& task, const TaskContext& ctx)>;

namespace tasks {

inline CaseOutcome expansion(const json& t, const TaskContext& c) {
  const auto& w = c.where;
  cfg::keys(t, {"kind", "operator", "field", "point", "node", "time", "ladder", "expect_c0", "expect_c2", "rel_tol",
                "abs_tol"},
            w);
  const auto& b = *c.built;
  const OperatorKind kind = parse_operator_kind(cfg::str(t, "operator", std::nullopt, w));
  const FieldSpec f = parse_field(t.contains("field") ? t.at("field") : json(1.0), b.model, c.seed, w + ".field");
  const double time = detail::start_time(t, b.space(), "time", w);
  auto ladder = cfg::ladder(t, w);
  LimitFit fit;
  if (b.analytic()) {
    const Point x = t.contains("point") ? detail::parse_point(t.at("point"), b.model, w + ".point")
                    : b.model.is_sphere() ? Point(Point::Unit(b.model.ambient_dimension(), 0))
                                          : Point(Point::Zero(b.model.ambient_dimension()));
    fit = expansion_fit(kind, b.model, time, x, f.function(), ladder);
  } else {
    const std::size_t i = detail::node_index(t, "node", b.space(), 0, w);
    fit = expansion_fit(kind, b.space(), time, i, evaluate(f, b.space(), time), ladder);
  }
  CaseOutcome out;
  const std::string label = std::string(to_string(kind)) + "(" + f.label() + ")";
  for (std::size_t k = 0; k < fit.ladder.size(); ++k) out.rows.push_back({label, fit.ladder[k], fit.values[k]});
  const double rel = cfg::positive(t, "rel_tol", 0.02, w);
  auto add = [&](const char* key, double value) {
    if (!t.contains(key)) return;
    const double target = cfg::num(t, key, std::nullopt, w);
    out.checks.push_back(target == 0.0 || t.contains("abs_tol")
                             ? detail::check_abs(key + 7, value, target, cfg::positive(t, "abs_tol", 1e-6, w))
                             : detail::check_rel(key + 7, value, target, rel));
  };
  add("expect_c0", fit.c0);
  add("expect_c2", fit.c2);
  out.details["fit"] = to_json(fit);
  out.details["operator"] = to_string(kind);
  out.details["field"] = f.label();
  out.verdict = detail::all_ok(out.checks) ? Verdict::pass : Verdict::fail;
  return out;
}

inline CaseOutcome heat_convergence(const json& t, const TaskContext& c) {
  const auto& w = c.where;
  cfg::keys(t, {"kind", "field", "propagation", "t0", "elapsed", "m", "j_ladder", "kernel", "max_error", "monotone_noise"},
            w);
  const auto view = heat_view(*c.built);
  const Space& s = *view.space;
  const FieldSpec f = parse_field(cfg::need(t, "field", w), view.model, c.seed, w + ".field");
  const std::string mode = cfg::str(t, "propagation", "static", w);
  if (mode != "static" && mode != "dynamic") throw InvalidArgument(w + ".propagation: expected static or dynamic");
  const double t0 = detail::start_time(t, s, "t0", w);
  const double t1 = t0 + cfg::positive(t, "elapsed", std::nullopt, w);
  const auto js = cfg::increasing(t, "j_ladder", std::nullopt, w, 1);
  ChernoffSchedule sch = parse_schedule(t.contains("kernel") ? json{{"kernel", t.at("kernel")}} : json::object(),
                                        OperatorKind::nu, w);
  sch.outer = static_cast<int>(cfg::integer(t, "m", 1, w, 1));
  const ScalarField f0 = evaluate(f, s, t0);
  ScalarField exact = mode == "static" ? exact_heat(f, view.model, s, t0, t0) : exact_heat(f, view.model, s, t0, t1);
  if (mode == "static") {
    const double integral = (t1 - t0) / view.model.scale2(t0);
    const auto pts = space_points(s);
    for (std::size_t i = 0; i < pts.size(); ++i) exact.values[i] = f.decayed(pts[i], integral);
  }
  CaseOutcome out;
  std::vector<double> errors;
  for (double jd : js) {
    sch.inner = static_cast<int>(jd);
    const auto r = mode == "static" ? static_heat(s, t0, t0, t1, sch, f0) : dynamic_heat(s, t0, t1, sch, f0);
    const double err = (r.field.values - exact.values).cwiseAbs().maxCoeff();
    errors.push_back(err);
    out.rows.push_back({"sup_error", jd, err});
  }
  if (t.contains("max_error")) out.checks.push_back(detail::check_max("final_sup_error", errors.back(), cfg::positive(t, "max_error", std::nullopt, w)));
  const double noise = cfg::num(t, "monotone_noise", 0.2, w);
  double worst = 0.0;
  for (std::size_t k = 1; k < errors.size(); ++k) worst = std::max(worst, errors[k] / errors[k - 1]);
  if (errors.size() > 1) out.checks.push_back(detail::check_max("max_error_ratio_per_doubling", worst, 1.0 + noise));
  out.details["errors"] = errors;
  out.details["propagation"] = mode;
  out.verdict = detail::all_ok(out.checks) ? Verdict::pass : Verdict::fail;
  return out;
}

inline CaseOutcome conjugate_convergence(const json& t, const TaskContext& c) {
  const auto& w = c.where;
  cfg::keys(t, {"kind", "field", "tau0", "tau1", "m", "j", "kernel", "mode", "max_error", "mass_tol", "refine_tol",
                "max_doublings"},
            w);
  const auto& b = *c.built;
  const Space& s = b.space();
  const FieldSpec f = parse_field(t.contains("field") ? t.at("field") : json(1.0), b.model, c.seed, w + ".field");
  const double tau0 = detail::start_time(t, s, "tau0", w);
  const double tau1 = cfg::num(t, "tau1", s.interval().hi, w);
  if (!(tau1 > tau0)) throw InvalidArgument(w + ".tau1: must exceed tau0");
  const ChernoffSchedule sch = parse_schedule(t, OperatorKind::beta, w);
  const ScalarField u0 = evaluate(f, s, tau0);
  CaseOutcome out;
  const double mass0 = u0.values.dot(s.weights(tau0));
  ScalarField u = u0;
  const double step = (tau1 - tau0) / sch.outer;
  ChernoffSchedule one = sch;
  one.outer = 1;
  double max_err = 0.0, max_drift = 0.0;
  const bool reference = f.is_constant();
  const double c0 = reference ? f(Point::Zero(b.model.ambient_dimension())) : 0.0;
  out.rows.push_back({"mass", tau0, mass0});
  for (int l = 0; l < sch.outer; ++l) {
    const double a = tau0 + l * step, e = l + 1 == sch.outer ? tau1 : tau0 + (l + 1) * step;
    u = dynamic_conjugate(s, a, e, one, u).field;
    const double mass = u.values.dot(s.weights(e));
    max_drift = std::max(max_drift, std::abs(mass - mass0) / std::abs(mass0));
    out.rows.push_back({"mass", e, mass});
    out.rows.push_back({"min", e, u.values.minCoeff()});
    out.rows.push_back({"max", e, u.values.maxCoeff()});
    if (reference) {
      const double ref = exact_conjugate_constant(c0, b.model, tau0, e);
      const double err = (u.values.array() - ref).abs().maxCoeff();
      max_err = std::max(max_err, err);
      out.rows.push_back({"reference", e, ref});
      out.rows.push_back({"sup_error", e, err});
    }
  }
  if (reference) {
    out.details["reference_final"] = exact_conjugate_constant(c0, b.model, tau0, tau1);
    if (t.contains("max_error"))
      out.checks.push_back(detail::check_max("sup_error", max_err, cfg::positive(t, "max_error", std::nullopt, w)));
  } else if (t.contains("max_error")) {
    throw InvalidArgument(w + ".max_error: a closed-form reference needs a constant field");
  }
  if (t.contains("mass_tol"))
    out.checks.push_back(detail::check_max("relative_mass_drift", max_drift, cfg::positive(t, "mass_tol", std::nullopt, w)));
  if (t.contains("refine_tol")) {
    const auto study = refine([&](const ChernoffSchedule& sc) { return dynamic_conjugate(s, tau0, tau1, sc, u0); }, sch,
                              cfg::positive(t, "refine_tol", std::nullopt, w),
                              static_cast<int>(cfg::integer(t, "max_doublings", 2, w, 0)));
    out.refinement = refinement_csv(study);
    out.details["refinement_converged"] = study.converged;
  }
  out.details["final_min"] = u.values.minCoeff();
  out.details["final_max"] = u.values.maxCoeff();
  out.details["max_sup_error"] = max_err;
  out.details["max_mass_drift"] = max_drift;
  out.verdict = detail::all_ok(out.checks) ? Verdict::pass : Verdict::fail;
  return out;
}

inline CaseOutcome duality(const json& t, const TaskContext& c) {
  const auto& w = c.where;
  cfg::keys(t, {"kind", "field", "y", "tau0", "tau", "schedules", "kernel", "max_gap", "require_decrease"}, w);
  const auto& b = *c.built;
  const Space& s = b.space();
  const FieldSpec g = parse_field(cfg::need(t, "field", w), b.model, c.seed, w + ".field");
  const std::size_t y = detail::node_index(t, "y", s, 0, w);
  const double tau0 = detail::start_time(t, s, "tau0", w);
  const double tau = cfg::num(t, "tau", s.interval().hi, w);
  if (!(tau > tau0)) throw InvalidArgument(w + ".tau: must exceed tau0");
  const auto& list = cfg::need(t, "schedules", w);
  if (!list.is_array() || list.empty()) throw InvalidArgument(w + ".schedules: expected a nonempty array of [m, j]");
  const OperatorKind kernel =
      t.contains("kernel") ? parse_operator_kind(cfg::str(t, "kernel", std::nullopt, w)) : OperatorKind::beta;
  const ScalarField gf = evaluate(g, s, tau0);
  CaseOutcome out;
  std::vector<double> gaps;
  for (std::size_t k = 0; k < list.size(); ++k) {
    const auto& e = list[k];
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer() || e[0] < 1 || e[1] < 1)
      throw InvalidArgument(w + ".schedules[" + std::to_string(k) + "]: expected [m, j] positive integers");
    ChernoffSchedule sch;
    sch.outer = e[0];
    sch.inner = e[1];
    sch.kernel = kernel;
    const double gap = std::abs(duality_gap(s, tau0, tau, gf, y, sch));
    gaps.push_back(gap);
    out.rows.push_back({"gap", double(sch.outer), gap});
  }
  if (t.contains("max_gap")) out.checks.push_back(detail::check_max("final_gap", gaps.back(), cfg::positive(t, "max_gap", std::nullopt, w)));
  if (cfg::boolean(t, "require_decrease", false, w)) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < gaps.size(); ++k) worst = std::max(worst, gaps[k] - gaps[k - 1]);
    Check ch{"max_gap_increase", worst, 0.0, 0.0, gaps.size() > 1 && worst < 0.0};
    out.checks.push_back(ch);
  }
  out.details["gaps"] = gaps;
  out.verdict = detail::all_ok(out.checks) ? Verdict::pass : Verdict::fail;
  return out;
}

inline CaseOutcome wsrf(const json& t, const TaskContext& c) {
  const auto& w = c.where;
  cfg::keys(t, {"kind", "field", "time_grid", "m", "j", "kernel", "mode", "slack"}, w);
  const auto view = heat_view(*c.built);
  const FieldSpec f = parse_field(cfg::need(t, "field", w), view.model, c.seed, w + ".field");
  const auto grid = cfg::increasing(t, "time_grid", std::nullopt, w);
  const ChernoffSchedule sch = parse_schedule(t, OperatorKind::nu, w);
  WsrfOptions o;
  if (t.contains("slack")) o.slack = cfg::positive(t, "slack", std::nullopt, w);
  auto rep = check_wsrf(*view.space, evaluate(f, *view.space, grid.front()), grid, sch, o);
  CaseOutcome out;
  for (const auto& p : rep.series) out.rows.push_back({p.label, p.time, p.value});
  out.verdict = rep.verdict;
  out.reports.push_back(std::move(rep));
  return out;
}

inline DiffusionInit parse_init(const json& j, const BuiltSpace& b, double tau0, std::uint64_t seed,
                                const std::string& where) {
  if (j.is_object() && j.contains("delta")) {
    cfg::keys(j, {"delta"}, where);
    return DiffusionInit::delta(detail::node_index(j, "delta", b.space(), 0, where));
  }
  const FieldSpec f = parse_field(j, b.model, seed, where);
  return DiffusionInit::from_density(evaluate(f, b.space(), tau0).values);
}

inline std::vector<VerdictReport> contraction_reports(const json& t, const TaskContext& c) {
  const auto& w = c.where;
  const auto& b = *c.built;
  const Space& s = b.space();
  const auto grid = cfg::increasing(t, "tau_grid", std::nullopt, w);
  const auto& inits = cfg::need(t, "inits", w);
  if (!inits.is_array() || inits.size() != 2) throw InvalidArgument(w + ".inits: expected two initial conditions");
  const auto i1 = parse_init(inits[0], b, grid.front(), c.seed, w + ".inits[0]");
  const auto i2 = parse_init(inits[1], b, grid.front(), c.seed, w + ".inits[1]");
  const ChernoffSchedule sch = parse_schedule(t, OperatorKind::beta, w);
  ContractionOptions o;
  if (t.contains("slack")) o.slack = cfg::positive(t, "slack", std::nullopt, w);
  if (t.contains("solver")) {
    const auto& sv = t.at("solver");
    cfg::keys(sv, {"kind", "epsilon", "max_iterations", "tolerance"}, w + ".solver");
    const std::string kind = cfg::str(sv, "kind", "exact", w + ".solver");
    if (kind != "exact" && kind != "entropic") throw InvalidArgument(w + ".solver.kind: expected exact or entropic");
    o.solver.kind = kind == "exact" ? SolverKind::exact : SolverKind::entropic;
    o.solver.epsilon = cfg::positive(sv, "epsilon", o.solver.epsilon, w + ".solver");
    o.solver.max_iterations = static_cast<int>(cfg::integer(sv, "max_iterations", o.solver.max_iterations, w + ".solver", 1));
    o.solver.tolerance = cfg::positive(sv, "tolerance", o.solver.tolerance, w + ".solver");
  }
  const auto& costs = cfg::need(t, "costs", w);
  if (!costs.is_array() || costs.empty()) throw InvalidArgument(w + ".costs: expected a nonempty array");
  std::vector<VerdictReport> reps;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    const CostSpec cost = parse_cost(costs[k], w + ".costs[" + std::to_string(k) + "]");
    reps.push_back(check_coupled_contraction(s, i1, i2, cost, grid, sch, o));
  }
  const auto pairs = cfg::integer(t, "jensen_pairs", 0, w, 0);
  if (pairs > 0) reps.push_back(jensen_audit(s, grid.front(), static_cast<std::size_t>(pairs), c.seed, o.solver));
  return reps;
}

inline CaseOutcome contraction(const json& t, const TaskContext& c) {
  cfg::keys(t, {"kind", "inits", "costs", "tau_grid", "m", "j", "kernel", "mode", "slack", "solver", "jensen_pairs"},
            c.where);
  CaseOutcome out;
  out.reports = contraction_reports(t, c);
  for (const auto& r : out.reports) {
    for (const auto& p : r.series) out.rows.push_back({p.label, p.time, p.value});
    out.verdict = combine(out.verdict, r.verdict);
  }
  return out;
}

inline std::vector<std::size_t> centers(const json& t, const Space& s, bool analytic, const std::string& where) {
  if (analytic) return {0};
  if (t.contains("centers") && t.at("centers").is_array()) {
    std::vector<std::size_t> out;
    for (const auto& x : t.at("centers")) {
      if (!x.is_number_integer() || x.get<long long>() < 0 || std::size_t(x.get<long long>()) >= s.size())
        throw InvalidArgument(where + ".centers: indices must lie in [0, N)");
      out.push_back(x.get<std::size_t>());
    }
    if (out.empty()) throw InvalidArgument(where + ".centers: must be nonempty");
    return out;
  }
  const auto count = static_cast<std::size_t>(cfg::integer(t, "centers", 20, where, 1));
  std::vector<std::size_t> out;
  const std::size_t n = s.size(), k = std::min(count, n);
  for (std::size_t q = 0; q < k; ++q) out.push_back(q * n / k);
  return out;
}

inline CaseOutcome trace(const json& t, const TaskContext& c) {
  const auto& w = c.where;
  cfg::keys(t, {"kind", "domain", "tau", "centers", "derivative_side", "ladder", "expect_ball", "expect_sphere",
                "rel_tol"},
            w);
  const auto& b = *c.built;
  const Space& s = b.space();
  const double tau = detail::start_time(t, s, "tau", w);
  const std::string dom = cfg::str(t, "domain", "both", w);
  if (dom != "ball" && dom != "sphere" && dom != "both") throw InvalidArgument(w + ".domain: expected ball, sphere or both");
  const auto side = cfg::side(t, w);
  const auto ladder = cfg::ladder(t, w);
  const auto cs = centers(t, s, b.analytic(), w);
  const double rel = cfg::positive(t, "rel_tol", 0.05, w);
  CaseOutcome out;
  for (Domain d : {Domain::ball, Domain::sphere}) {
    if (dom != "both" && dom != to_string(d)) continue;
    const auto est = extrapolated_trace(s, tau, cs, d, side, ladder);
    for (std::size_t k = 0; k < cs.size(); ++k) {
      out.rows.push_back({std::string(to_string(d)) + "-extrapolated", double(cs[k]), est.fits[k].c0});
      for (std::size_t q = 0; q < est.fits[k].ladder.size(); ++q)
        out.rows.push_back({std::string(to_string(d)) + "@" + std::to_string(cs[k]), est.fits[k].ladder[q],
                            est.fits[k].values[q]});
    }
    out.details[to_string(d)] = {{"mean", est.mean}, {"min", est.min}, {"max", est.max}, {"centers", cs.size()}};
    const std::string key = std::string("expect_") + to_string(d);
    if (t.contains(key))
      out.checks.push_back(detail::check_rel(std::string(to_string(d)) + "_mean", est.mean,
                                             cfg::num(t, key.c_str(), std::nullopt, w), rel));
  }
  out.verdict = detail::all_ok(out.checks) ? Verdict::pass : Verdict::fail;
  return out;
}

inline SaturationConfig parse_saturation(const json& t, const Space& s, const std::string& w) {
  SaturationConfig cfgs;
  const std::string variant = cfg::str(t, "variant", "ball", w);
  if (variant != "ball" && variant != "sphere") throw InvalidArgument(w + ".variant: expected ball or sphere");
  cfgs.variant = variant == "ball" ? SaturationVariant::ball : SaturationVariant::sphere;
  try {
    cfgs.constant_mode = parse_constant_mode(cfg::str(t, "constant_mode", "self-consistent", w));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(w + ".constant_mode: " + e.what());
  }
  cfgs.epsilon_ladder = cfg::ladder(t, w);
  cfgs.derivative_side = cfg::side(t, w);
  cfgs.slack = cfg::positive(t, "slack", 0.05, w);
  if (t.contains("core")) {
    for (const auto& x : t.at("core")) {
      if (!x.is_number_integer() || x.get<long long>() < 0) throw InvalidArgument(w + ".core: expected point indices");
      cfgs.core.push_back(x.get<std::size_t>());
    }
    if (cfgs.core.empty()) throw InvalidArgument(w + ".core: must be nonempty");
    (void)s;
  }
  return cfgs;
}

inline void saturation_rows(const VerdictReport& rep, CaseOutcome& out) {
  for (const auto& p : rep.series) out.rows.push_back({p.label, p.time, p.value});
  for (const auto& [label, fit] : rep.fits)
    for (std::size_t q = 0; q < fit.ladder.size(); ++q) out.rows.push_back({"bracket-" + label, fit.ladder[q], fit.values[q]});
}

inline void defect_check(const json& t, const VerdictReport& rep, CaseOutcome& out, const std::string& w) {
  if (!t.contains("expect_defect")) return;
  const double target = cfg::num(t, "expect_defect", std::nullopt, w);
  const double tol = cfg::positive(t, "abs_tol", 0.05, w);
  double worst = 0.0, at = target;
  for (const auto& p : rep.series)
    if (p.label == "defect" && std::abs(p.value - target) >= worst) {
      worst = std::abs(p.value - target);
      at = p.value;
    }
  out.checks.push_back(detail::check_abs("defect", at, target, tol));
}

inline CaseOutcome saturation(const json& t, const TaskContext& c) {
  const auto& w = c.where;
  cfg::keys(t, {"kind", "variant", "constant_mode", "tau", "ladder", "derivative_side", "core", "slack",
                "expect_defect", "abs_tol"},
            w);
  const Space& s = c.built->space();
  const double tau = detail::start_time(t, s, "tau", w);
  auto rep = check_saturation(s, tau, parse_saturation(t, s, w));
  CaseOutcome out;
  saturation_rows(rep, out);
  defect_check(t, rep, out, w);
  out.verdict = rep.verdict;
  out.reports.push_back(std::move(rep));
  return out;
}

inline CaseOutcome weak_ricci_flow(const json& t, const TaskContext& c) {
  const auto& w = c.where;
  cfg::keys(t, {"kind", "wsrf", "saturation"}, w);
  const auto& wj = cfg::need(t, "wsrf", w);
  const auto& sj = cfg::need(t, "saturation", w);
  cfg::keys(wj, {"field", "time_grid", "m", "j", "kernel", "mode", "slack"}, w + ".wsrf");
  cfg::keys(sj, {"variant", "constant_mode", "tau", "ladder", "derivative_side", "core", "slack", "expect_defect",
                 "abs_tol"},
            w + ".saturation");
  const auto view = heat_view(*c.built);
  const FieldSpec f = parse_field(cfg::need(wj, "field", w + ".wsrf"), view.model, c.seed, w + ".wsrf.field");
  WeakFlowInputs in;
  in.heat_space = view.space.get();
  in.time_grid = cfg::increasing(wj, "time_grid", std::nullopt, w + ".wsrf");
  in.f0 = evaluate(f, *view.space, in.time_grid.front());
  in.schedule = parse_schedule(wj, OperatorKind::nu, w + ".wsrf");
  if (wj.contains("slack")) in.options.slack = cfg::positive(wj, "slack", std::nullopt, w + ".wsrf");
  const Space& s = c.built->space();
  const double tau = detail::start_time(sj, s, "tau", w + ".saturation");
  auto rep = check_weak_ricci_flow(s, tau, in, parse_saturation(sj, s, w + ".saturation"));
  CaseOutcome out;
  saturation_rows(rep, out);
  defect_check(sj, rep, out, w + ".saturation");
  out.verdict = rep.verdict;
  out.reports.push_back(std::move(rep));
  return out;
}

}  // namespace tasks

inline const std::map<std::string, TaskRunner>& task_registry();

namespace tasks {

inline CaseOutcome crosscheck(const json& t, const TaskContext& c) {
  const auto& w = c.where;
  cfg::keys(t, {"kind", "flows"}, w);
  const auto& flows = cfg::need(t, "flows", w);
  if (!flows.is_array() || flows.empty()) throw InvalidArgument(w + ".flows: expected a nonempty array");
  std::vector<CrosscheckCase> cases;
  CaseOutcome out;
  for (std::size_t k = 0; k < flows.size(); ++k) {
    const auto& fl = flows[k];
    const std::string fw = w + ".flows[" + std::to_string(k) + "]";
    cfg::keys(fl, {"name", "contraction", "wsrf"}, fw);
    const std::string name = cfg::str(fl, "name", std::nullopt, fw);
    const auto& cj = cfg::need(fl, "contraction", fw);
    const auto& wj = cfg::need(fl, "wsrf", fw);
    cfg::keys(cj, {"space", "task"}, fw + ".contraction");
    cfg::keys(wj, {"space", "task"}, fw + ".wsrf");
    const auto cspace = build_space(cfg::need(cj, "space", fw + ".contraction"), c.seed, fw + ".contraction.space");
    const auto wspace = build_space(cfg::need(wj, "space", fw + ".wsrf"), c.seed, fw + ".wsrf.space");
    const auto& ct = cfg::need(cj, "task", fw + ".contraction");
    const auto& wt = cfg::need(wj, "task", fw + ".wsrf");
    cfg::keys(ct, {"kind", "inits", "costs", "tau_grid", "m", "j", "kernel", "mode", "slack", "solver", "jensen_pairs"},
              fw + ".contraction.task");
    if (cfg::str(ct, "kind", "contraction", fw + ".contraction.task") != "contraction")
      throw InvalidArgument(fw + ".contraction.task.kind: must be contraction");
    if (cfg::str(wt, "kind", "wsrf", fw + ".wsrf.task") != "wsrf")
      throw InvalidArgument(fw + ".wsrf.task.kind: must be wsrf");
    const auto creps = contraction_reports(ct, {&cspace, c.seed, fw + ".contraction.task"});
    const auto wout = wsrf(wt, {&wspace, c.seed, fw + ".wsrf.task"});
    for (const auto& r : wout.rows) out.rows.push_back({name + ":" + r.series, r.x, r.value});
    for (const auto& r : creps) {
      if (r.check != "coupled-contraction") continue;
      const std::string cost = r.details.value("cost", "?");
      for (const auto& p : r.series) out.rows.push_back({name + ":" + p.label, p.time, p.value});
      cases.push_back({name, cost, r.verdict, wout.verdict});
    }
  }
  auto rep = crosscheck(cases);
  out.verdict = rep.verdict;
  out.reports.push_back(std::move(rep));
  return out;
}

}  // namespace tasks

struct RunOptions {
  std::optional<std::uint64_t> seed_override;
};

inline ScenarioResult run_scenario(const ScenarioConfig& config, const RunOptions& options = {});
inline ScenarioConfig parse_scenario(const json& j);

namespace tasks {

inline CaseOutcome determinism(const json& t, const TaskContext& c) {
  const auto& w = c.where;
  cfg::keys(t, {"kind", "scenarios", "runs"}, w);
  const auto& names = cfg::need(t, "scenarios", w);
  if (!names.is_array() || names.empty()) throw InvalidArgument(w + ".scenarios: expected catalogue names");
  const auto runs = cfg::integer(t, "runs", 2, w, 2);
  CaseOutcome out;
  for (const auto& n : names) {
    if (!n.is_string()) throw InvalidArgument(w + ".scenarios: expected catalogue names");
    const auto cj = catalogue_scenario(n.get<std::string>());
    if (!cj) throw InvalidArgument(w + ".scenarios: unknown scenario '" + n.get<std::string>() + "'");
    const auto sc = parse_scenario(*cj);
    for (const auto& cs : sc.cases)
      if (cs.task.value("kind", "") == "determinism") throw InvalidArgument(w + ".scenarios: cannot nest determinism");
    std::string first;
    bool same = true;
    for (long long r = 0; r < runs; ++r) {
      const auto res = run_scenario(sc, {c.seed});
      if (res.error) throw Error("scenario '" + sc.name + "' failed: " + res.report.value("error", std::string("?")));
      if (r == 0) first = res.data_csv;
      else same = same && res.data_csv == first;
      out.rows.push_back({sc.name, double(r), double(std::stoull(fnv1a(res.data_csv).substr(0, 12), nullptr, 16))});
    }
    out.checks.push_back({sc.name + "_identical", same ? 1.0 : 0.0, 1.0, 0.0, same});
    out.details[sc.name] = {{"data_hash", fnv1a(first)}, {"bytes", first.size()}, {"runs", runs}};
  }
  out.verdict = detail::all_ok(out.checks) ? Verdict::pass : Verdict::fail;
  return out;
}

}  // namespace tasks

inline const std::map<std::string, TaskRunner>& task_registry() {
  static const std::map<std::string, TaskRunner> r{
      {"expansion-study", tasks::expansion},
      {"heat-convergence", tasks::heat_convergence},
      {"conjugate-convergence", tasks::conjugate_convergence},
      {"duality", tasks::duality},
      {"wsrf", tasks::wsrf},
      {"contraction", tasks::contraction},
      {"trace", tasks::trace},
      {"saturation", tasks::saturation},
      {"weak-ricci-flow", tasks::weak_ricci_flow},
      {"crosscheck", tasks::crosscheck},
      {"determinism", tasks::determinism},
  };
  return r;
}

inline bool task_needs_space(const std::string& kind) { return kind != "crosscheck" && kind != "determinism"; }

// ---------------------------------------------------------------------------
// parsing

inline ScenarioConfig parse_scenario(const json& j) {
  const std::string w = "config";
  cfg::keys(j, {"schema", "name", "description", "seed", "output", "space", "task", "expect", "cases"}, w);
  if (cfg::str(j, "schema", std::nullopt, w) != scenario_schema)
    throw InvalidArgument(w + ".schema: expected \"" + std::string(scenario_schema) + "\"");
  ScenarioConfig sc;
  sc.raw = j;
  sc.name = cfg::str(j, "name", std::nullopt, w);
  if (sc.name.empty()) throw InvalidArgument(w + ".name: must be nonempty");
  sc.description = cfg::str(j, "description", "", w);
  sc.seed = static_cast<std::uint64_t>(cfg::integer(j, "seed", 1, w, 0));
  if (j.contains("output")) sc.output = cfg::str(j, "output", std::nullopt, w);
  auto add_case = [&](const json& cj, const std::string& cw, std::string fallback_name) {
    cfg::keys(cj, {"name", "space", "task", "expect"}, cw);
    CaseConfig cc;
    cc.name = cfg::str(cj, "name", fallback_name, cw);
    cc.task = cfg::need(cj, "task", cw);
    const std::string kind = cfg::str(cc.task, "kind", std::nullopt, cw + ".task");
    if (!task_registry().count(kind))
      throw InvalidArgument(cw + ".task.kind: unknown task '" + kind + "'");
    if (task_needs_space(kind)) {
      cc.space = cfg::need(cj, "space", cw);
      build_model(cc.space, cw + ".space");
    } else if (cj.contains("space")) {
      throw InvalidArgument(cw + ".space: task " + kind + " takes no space");
    }
    if (cj.contains("expect")) cc.expect = cfg::verdict(cfg::str(cj, "expect", std::nullopt, cw), cw + ".expect");
    sc.cases.push_back(std::move(cc));
  };
  if (j.contains("cases")) {
    if (j.contains("space") || j.contains("task") || j.contains("expect"))
      throw InvalidArgument(w + ": give either cases or a single space/task");
    const auto& cs = j.at("cases");
    if (!cs.is_array() || cs.empty()) throw InvalidArgument(w + ".cases: expected a nonempty array");
    for (std::size_t k = 0; k < cs.size(); ++k)
      add_case(cs[k], w + ".cases[" + std::to_string(k) + "]", "case" + std::to_string(k));
  } else {
    json single = json::object();
    for (const char* k : {"space", "task", "expect"})
      if (j.contains(k)) single[k] = j.at(k);
    add_case(single, w, sc.name);
  }
  std::set<std::string> names;
  for (const auto& c : sc.cases)
    if (!names.insert(c.name).second) throw InvalidArgument(w + ".cases: duplicate case name '" + c.name + "'");
  return sc;
}

// Dry run of every case's parameter parsing without heavy computation.
inline void validate_scenario(const ScenarioConfig& sc) {
  for (std::size_t k = 0; k < sc.cases.size(); ++k) {
    const auto& c = sc.cases[k];
    if (!task_needs_space(c.task.at("kind"))) continue;
    const std::string w = "config.cases[" + std::to_string(k) + "]";
    const ModelSpace m = build_model(c.space, w + ".space");
    for (const char* key : {"field"})
      if (c.task.contains(key)) parse_field(c.task.at(key), m, sc.seed, w + ".task." + key);
    if (c.task.contains("costs") && c.task.at("costs").is_array())
      for (std::size_t q = 0; q < c.task.at("costs").size(); ++q)
        parse_cost(c.task.at("costs")[q], w + ".task.costs[" + std::to_string(q) + "]");
    if (c.task.contains("m") || c.task.contains("j")) parse_schedule(c.task, OperatorKind::nu, w + ".task");
  }
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config parse error in '" + path + "': " + e.what());
  }
  return parse_scenario(j);
}

// ---------------------------------------------------------------------------
// running

inline json check_json(const Check& c) {
  return {{"name", c.name}, {"value", c.value}, {"target", c.target}, {"tolerance", c.tolerance}, {"ok", c.ok}};
}

inline ScenarioResult run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  ScenarioResult res;
  res.name = config.name;
  res.seed = options.seed_override.value_or(config.seed);
  json effective = config.raw;
  effective["seed"] = res.seed;
  res.config_hash = fnv1a(effective.dump());
  WarningCapture warnings;
  Verdict overall = Verdict::pass;
  std::string first_error;
  for (std::size_t k = 0; k < config.cases.size(); ++k) {
    const auto& cc = config.cases[k];
    CaseResult cr;
    cr.name = cc.name;
    cr.task = cc.task.at("kind");
    cr.expect = cc.expect;
    const std::string where = config.cases.size() == 1 ? "config.task" : "config.cases[" + std::to_string(k) + "].task";
    try {
      std::optional<BuiltSpace> built;
      if (task_needs_space(cr.task)) built = build_space(cc.space, res.seed, where.substr(0, where.size() - 5) + ".space");
      cr.outcome = task_registry().at(cr.task)(cc.task, {built ? &*built : nullptr, res.seed, where});
      cr.verdict = cr.outcome.verdict;
      const bool checks = detail::all_ok(cr.outcome.checks);
      cr.ok = checks && cr.verdict == cc.expect.value_or(Verdict::pass);
      const Verdict outcome = cr.ok ? Verdict::pass
                                    : (cr.verdict == Verdict::inconclusive && checks ? Verdict::inconclusive
                                                                                     : Verdict::fail);
      overall = combine(overall, outcome);
    } catch (const std::exception& e) {
      cr.error = e.what();
      cr.ok = false;
      res.error = true;
      if (first_error.empty()) first_error = cc.name + ": " + e.what();
    }
    res.cases.push_back(std::move(cr));
  }
  res.verdict = overall;
  res.exit_code = res.error ? 1 : exit_code_for(overall);

  // data.csv in long format
  res.data_csv = "case,series,x,value\n";
  std::string witnesses;
  for (const auto& cr : res.cases) {
    for (const auto& r : cr.outcome.rows)
      res.data_csv += cr.name + "," + r.series + "," + format_number(r.x) + "," + format_number(r.value) + "\n";
    if (!cr.outcome.refinement.empty()) {
      if (res.refinement_csv.empty()) res.refinement_csv = "case," + cr.outcome.refinement.substr(0, cr.outcome.refinement.find('\n') + 1);
      std::size_t pos = cr.outcome.refinement.find('\n') + 1;
      while (pos < cr.outcome.refinement.size()) {
        const std::size_t end = cr.outcome.refinement.find('\n', pos);
        res.refinement_csv += cr.name + "," + cr.outcome.refinement.substr(pos, end - pos + 1);
        pos = end + 1;
      }
    }
    for (const auto& rep : cr.outcome.reports)
      if (!rep.witnesses.empty()) {
        const auto csv = witness_csv(rep);
        witnesses += csv.substr(csv.find('\n') + 1);
      }
  }
  if (!witnesses.empty()) res.witnesses_csv = "check,time,points,value,note\n" + witnesses;

  std::vector<std::string> msgs = warnings.messages();
  std::sort(msgs.begin(), msgs.end());
  msgs.erase(std::unique(msgs.begin(), msgs.end()), msgs.end());
  if (msgs.size() > 100) msgs.resize(100);
  res.warnings = msgs;

  json rep{{"schema", report_schema},
           {"scenario", config.name},
           {"description", config.description},
           {"seed", res.seed},
           {"version", version},
           {"verdict", res.error ? "error" : to_string(res.verdict)},
           {"exit_code", res.exit_code},
           {"warnings", res.warnings}};
  if (res.error) rep["error"] = first_error;
  rep["cases"] = json::array();
  for (const auto& cr : res.cases) {
    json cj{{"name", cr.name}, {"task", cr.task}, {"ok", cr.ok}};
    if (cr.error.empty()) cj["verdict"] = to_string(cr.verdict);
    else cj["error"] = cr.error;
    if (cr.expect) cj["expect"] = to_string(*cr.expect);
    cj["checks"] = json::array();
    for (const auto& ch : cr.outcome.checks) cj["checks"].push_back(check_json(ch));
    cj["reports"] = json::array();
    for (const auto& r : cr.outcome.reports) cj["reports"].push_back(to_json(r));
    cj["details"] = cr.outcome.details;
    rep["cases"].push_back(cj);
  }
  res.report = rep;
  return res;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
}

// Writes report.json, data.csv, manifest.json and, when present,
// refinement.csv and witnesses.csv.
inline void write_outputs(const ScenarioResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::map<std::string, std::string> files;
  files["report.json"] = res.report.dump(2) + "\n";
  files["data.csv"] = res.data_csv;
  if (!res.refinement_csv.empty()) files["refinement.csv"] = res.refinement_csv;
  if (!res.witnesses_csv.empty()) files["witnesses.csv"] = res.witnesses_csv;
  json manifest{{"schema", manifest_schema},
                {"scenario", res.name},
                {"seed", res.seed},
                {"version", version},
                {"config_hash", "fnv1a64:" + res.config_hash}};
  for (const auto& [name, text] : files) {
    write_text(dir / name, text);
    manifest["files"][name] = "fnv1a64:" + fnv1a(text);
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace weakflow
