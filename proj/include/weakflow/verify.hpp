#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <random>
#include <string>
#include <vector>

#include "weakflow/averaging.hpp"
#include "weakflow/geometry.hpp"
#include "weakflow/transport.hpp"

namespace weakflow {

// ---------------------------------------------------------------------------
// reports

enum class Verdict { pass, fail, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct Witness {
  double time = 0.0;
  std::vector<std::size_t> points;
  double value = 0.0;
  std::string note;
};

struct SeriesPoint {
  std::string label;
  double time = 0.0;
  double value = 0.0;
};

struct VerdictReport {
  std::string check;
  Verdict verdict = Verdict::pass;
  std::string reason;  // set for inconclusive verdicts
  std::vector<Witness> witnesses;
  std::map<std::string, double> tolerances;
  std::vector<std::pair<std::string, LimitFit>> fits;
  std::vector<SeriesPoint> series;
  nlohmann::json details = nlohmann::json::object();

  bool passed() const { return verdict == Verdict::pass; }
};

inline constexpr std::size_t max_witnesses = 50;

inline nlohmann::json to_json(const Witness& w) {
  return {{"time", w.time}, {"points", w.points}, {"value", w.value}, {"note", w.note}};
}

inline nlohmann::json to_json(const VerdictReport& r) {
  nlohmann::json j{{"check", r.check}, {"verdict", to_string(r.verdict)}};
  if (!r.reason.empty()) j["reason"] = r.reason;
  j["witnesses"] = nlohmann::json::array();
  for (const auto& w : r.witnesses) j["witnesses"].push_back(to_json(w));
  j["tolerances"] = r.tolerances;
  j["fits"] = nlohmann::json::array();
  for (const auto& [label, fit] : r.fits) {
    auto f = to_json(fit);
    f["label"] = label;
    j["fits"].push_back(f);
  }
  j["series"] = nlohmann::json::array();
  for (const auto& s : r.series) j["series"].push_back({{"label", s.label}, {"time", s.time}, {"value", s.value}});
  j["details"] = r.details;
  return j;
}

inline std::string witness_csv(const VerdictReport& r) {
  std::string out = "check,time,points,value,note\n";
  for (const auto& w : r.witnesses) {
    std::string pts;
    for (std::size_t k = 0; k < w.points.size(); ++k) pts += (k ? ";" : "") + std::to_string(w.points[k]);
    out += r.check + "," + format_number(w.time) + "," + pts + "," + format_number(w.value) + "," + w.note + "\n";
  }
  return out;
}

// Merges sub-checks: fail dominates inconclusive, which dominates pass.
inline Verdict combine(Verdict a, Verdict b) {
  if (a == Verdict::fail || b == Verdict::fail) return Verdict::fail;
  if (a == Verdict::inconclusive || b == Verdict::inconclusive) return Verdict::inconclusive;
  return Verdict::pass;
}

namespace detail {

inline void add_witness(VerdictReport& r, Witness w) {
  if (r.witnesses.size() < max_witnesses) r.witnesses.push_back(std::move(w));
}

inline bool is_model(const Space& s) { return dynamic_cast<const ModelSpace*>(&s) != nullptr; }

inline double space_diameter(const Space& s, double t) {
  if (const auto* m = dynamic_cast<const ModelSpace*>(&s)) return m->diameter(t);
  return s.distance_matrix(t).maxCoeff();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// virtually psc

// r0 is the smallest probed radius at which some probe exceeds omega_n r^n by
// more than the slack; the check passes iff r0 lies above the smallest radius.
inline VerdictReport check_virtually_psc(const Space& space, const std::vector<double>& times,
                                         std::vector<double> radii) {
  VerdictReport rep;
  rep.check = "virtually-psc";
  if (times.empty() || radii.empty()) throw InvalidArgument("check_virtually_psc: needs times and radii");
  std::sort(radii.begin(), radii.end());
  const int n = space.dimension();
  const bool analytic = detail::is_model(space);
  for (double t : times) {
    require_time(space, t, "check_virtually_psc");
    const double diam = detail::space_diameter(space, t);
    for (double r : radii)
      if (!(r > 0.0) || !(r < diam))
        throw InvalidArgument("check_virtually_psc: radius " + format_number(r) + " must lie in (0, diameter)");
  }
  double r0 = std::numeric_limits<double>::infinity();
  double worst = -std::numeric_limits<double>::infinity();
  for (double t : times) {
    const std::size_t points = analytic ? 1 : space.size();
    const double mean_w = analytic ? 0.0 : space.weights(t).mean();
    for (double r : radii) {
      if (r > r0) break;
      const double bound = unit_ball_volume(n) * std::pow(r, n);
      for (std::size_t i = 0; i < points; ++i) {
        const double m = space.ball_measure(t, i, r);
        const double slack = analytic ? 1e-12 * bound : 3.0 * std::sqrt(m * mean_w);
        const double excess = m - bound - slack;
        worst = std::max(worst, (m - bound) / bound);
        if (excess > 0.0) {
          r0 = std::min(r0, r);
          if (r == radii.front())
            detail::add_witness(rep, {t, {i}, m / bound, "ball measure / omega_n r^n at r=" + format_number(r)});
        }
      }
    }
  }
  rep.verdict = r0 > radii.front() ? Verdict::pass : Verdict::fail;
  rep.details["r0"] = std::isinf(r0) ? nlohmann::json("inf") : nlohmann::json(r0);
  rep.details["max_relative_excess"] = worst;
  rep.tolerances["slack"] = analytic ? 0.0 : 3.0;
  rep.details["slack_rule"] = analytic ? "exact" : "3*sqrt(measure*mean_weight)";
  return rep;
}

// ---------------------------------------------------------------------------
// Lipschitz constants and WSRF

struct LipschitzResult {
  double value = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
};

inline LipschitzResult lipschitz_constant(const Space& space, double t, const ScalarField& f) {
  require_field(space, f, t, "lipschitz_constant");
  const Eigen::MatrixXd d = space.distance_matrix(t);
  const Eigen::VectorXd& v = f.values;
  const double same = 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff());
  const std::size_t n = space.size();
  std::vector<LipschitzResult> best(n);
  parallel_for(n, [&](std::size_t i) {
    LipschitzResult b{0.0, i, i};
    for (std::size_t j = i + 1; j < n; ++j) {
      const double df = std::abs(v[i] - v[j]);
      double q;
      if (d(i, j) > 0.0)
        q = df / d(i, j);
      else
        q = df > same ? std::numeric_limits<double>::infinity() : 0.0;
      if (q > b.value) b = {q, i, j};
    }
    best[i] = b;
  });
  LipschitzResult out;
  for (const auto& b : best)
    if (b.value > out.value) out = b;
  return out;
}

struct WsrfOptions {
  std::optional<double> slack;  // default 1e-3 * Lip(f0)
};

inline VerdictReport check_wsrf(const Space& space, const ScalarField& f0, const std::vector<double>& time_grid,
                                const ChernoffSchedule& schedule, const WsrfOptions& options = {}) {
  VerdictReport rep;
  rep.check = "wsrf";
  if (time_grid.size() < 2) throw InvalidArgument("check_wsrf: time grid needs at least 2 times");
  if (!space.is_static() && space.orientation() != Orientation::forward)
    throw InvalidArgument("check_wsrf: needs a forward-oriented space (use reversed())");
  require_field(space, f0, time_grid.front(), "check_wsrf");
  ScalarField f = f0;
  auto lip = lipschitz_constant(space, time_grid.front(), f);
  if (std::isinf(lip.value)) {
    rep.verdict = Verdict::inconclusive;
    rep.reason = "pseudo metric: initial field separates glued points";
    detail::add_witness(rep, {time_grid.front(), {lip.i, lip.j}, lip.value, "glued pair"});
    return rep;
  }
  const double slack = options.slack.value_or(1e-3 * lip.value);
  rep.tolerances["slack_lip"] = slack;
  rep.series.push_back({"lip", time_grid.front(), lip.value});
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < time_grid.size(); ++k) {
    f = dynamic_heat(space, time_grid[k - 1], time_grid[k], schedule, f).field;
    const auto next = lipschitz_constant(space, time_grid[k], f);
    rep.series.push_back({"lip", time_grid[k], next.value});
    const double rise = next.value - lip.value;
    worst = std::max(worst, rise);
    if (rise > slack) {
      rep.verdict = Verdict::fail;
      detail::add_witness(rep, {time_grid[k], {next.i, next.j}, rise,
                                "Lip rose from " + format_number(lip.value) + " to " + format_number(next.value)});
    }
    lip = next;
  }
  rep.details["max_increase"] = worst;
  return rep;
}

// ---------------------------------------------------------------------------
// coupled contraction

struct ContractionOptions {
  SolverOptions solver;
  std::optional<double> slack;  // default 1e-6 * initial cost + 1e-9
};

inline VerdictReport check_coupled_contraction(const Space& space, const DiffusionInit& init1,
                                               const DiffusionInit& init2, const CostSpec& cost,
                                               const std::vector<double>& tau_grid,
                                               const ChernoffSchedule& schedule,
                                               const ContractionOptions& options = {}) {
  VerdictReport rep;
  rep.check = "coupled-contraction";
  if (tau_grid.size() < 2) throw InvalidArgument("check_coupled_contraction: time grid needs at least 2 times");
  const auto d1 = make_diffusion(space, tau_grid.front(), init1, tau_grid, schedule);
  const auto d2 = make_diffusion(space, tau_grid.front(), init2, tau_grid, schedule);
  std::vector<TransportResult> costs;
  for (std::size_t k = 0; k < tau_grid.size(); ++k) {
    costs.push_back(ot_cost(space, tau_grid[k], d1.masses(space, k), d2.masses(space, k), cost, options.solver));
    rep.series.push_back({cost.label(), tau_grid[k], costs.back().total_cost});
  }
  const double slack = options.slack.value_or(1e-6 * costs.front().total_cost + 1e-9);
  rep.tolerances["slack_ot"] = slack;
  rep.details["cost"] = cost.label();
  rep.details["solver"] = options.solver.kind == SolverKind::exact ? "exact" : "entropic";
  rep.details["pseudo_metric"] = space.pseudo_metric();
  double worst = -std::numeric_limits<double>::infinity();
  bool uncertain = false;
  for (std::size_t k = 1; k < costs.size(); ++k) {
    const auto& prev = costs[k - 1];
    const auto& next = costs[k];
    // exact mode has lower == upper; entropic mode compares certified bounds
    const double surely = next.lower_bound - prev.total_cost;
    const double maybe = next.total_cost - prev.lower_bound;
    worst = std::max(worst, next.total_cost - prev.total_cost);
    if (surely > slack) {
      rep.verdict = Verdict::fail;
      detail::add_witness(rep, {tau_grid[k], {}, surely,
                                "cost rose from " + format_number(prev.total_cost) + " to " +
                                    format_number(next.total_cost)});
    } else if (maybe > slack) {
      uncertain = true;
    }
  }
  if (rep.verdict == Verdict::pass && uncertain) {
    rep.verdict = Verdict::inconclusive;
    rep.reason = "entropic gap too wide to certify monotonicity";
  }
  rep.details["max_increase"] = worst;
  return rep;
}

// W1 <= W2 on random pairs of probability measures on one slice.
inline VerdictReport jensen_audit(const Space& space, double tau, std::size_t pairs, std::uint64_t seed,
                                  const SolverOptions& solver = {}) {
  VerdictReport rep;
  rep.check = "jensen-audit";
  rep.tolerances["slack"] = 1e-12;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = space.size();
  const Eigen::MatrixXd dist = space.distance_matrix(tau);
  const Eigen::MatrixXd dist2 = dist.array().square();
  auto draw = [&]() {
    Eigen::VectorXd m(n);
    const double keep = 0.05 + 0.9 * u(rng);
    for (std::size_t i = 0; i < n; ++i) m[i] = u(rng) < keep ? -std::log(1.0 - u(rng)) : 0.0;
    if (m.sum() == 0.0) m[std::min(n - 1, std::size_t(u(rng) * n))] = 1.0;
    return Eigen::VectorXd(m / m.sum());
  };
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pairs; ++k) {
    const auto a = draw(), b = draw();
    const double w1 = ot_cost_matrix(dist, a, b, solver).total_cost;
    const double w2 = std::sqrt(std::max(0.0, ot_cost_matrix(dist2, a, b, solver).total_cost));
    worst = std::max(worst, w1 - w2);
    if (w1 > w2 + 1e-12) {
      rep.verdict = Verdict::fail;
      detail::add_witness(rep, {tau, {k}, w1 - w2, "W1 exceeds W2"});
    }
  }
  rep.details["pairs"] = pairs;
  rep.details["max_w1_minus_w2"] = worst;
  return rep;
}

// ---------------------------------------------------------------------------
// trace functional and saturation

enum class Domain { ball, sphere };

inline const char* to_string(Domain d) { return d == Domain::ball ? "ball" : "sphere"; }

inline Domain parse_domain(std::string_view s) {
  if (s == "ball") return Domain::ball;
  if (s == "sphere") return Domain::sphere;
  throw InvalidArgument("unknown domain '" + std::string(s) + "' (expected ball or sphere)");
}

namespace detail {

// +1 for backward-time spaces, -1 for forward-time ones.
inline double backward_sign(const Space& s) { return s.orientation() == Orientation::forward ? -1.0 : 1.0; }

inline DerivativeSide default_side(const Space& s) {
  if (s.is_static() || s.exact_d2_rate(s.interval().lo, 0, 0).has_value()) return DerivativeSide::exact;
  return s.orientation() == Orientation::forward ? DerivativeSide::upper : DerivativeSide::lower;
}

}  // namespace detail

// Closed form on a homogeneous model: rate of log scale^2 times the
// normalized second moment of the ball, or 1 on the sphere.
inline double trace_functional(const ModelSpace& space, double tau, double eps, Domain domain) {
  require_time(space, tau, "trace_functional");
  if (!(eps > 0.0)) throw InvalidArgument("trace_functional: epsilon must be positive");
  if (space.is_static()) return 0.0;
  const double rate = detail::backward_sign(space) * space.scale2_rate(tau) / space.scale2(tau);
  if (domain == Domain::sphere) {
    if (!(space.shell_area(tau, eps) > 0.0)) throw DegenerateSupport(0, "empty sphere");
    return rate;
  }
  const double m0 = integrate([&](double r) { return space.shell_area(tau, r); }, 0.0, eps, 64);
  const double m2 = integrate([&](double r) { return r * r * space.shell_area(tau, r); }, 0.0, eps, 64);
  return rate * m2 / (m0 * eps * eps);
}

// Averaged time derivative of d^2 about node i, in backward time. The ball
// form divides by eps^2; the shell form divides each sample by its own d^2.
inline double trace_functional(const Space& space, double tau, std::size_t i, double eps, Domain domain,
                               std::optional<DerivativeSide> side = std::nullopt,
                               const std::vector<double>& steps = default_time_steps()) {
  require_time(space, tau, "trace_functional");
  if (!(eps > 0.0)) throw InvalidArgument("trace_functional: epsilon must be positive");
  if (const auto* model = dynamic_cast<const ModelSpace*>(&space)) return trace_functional(*model, tau, eps, domain);
  const auto* sampled = dynamic_cast<const SampledSpace*>(&space);
  if (!sampled) throw InvalidArgument("trace_functional: unsupported space type");
  if (i >= space.size()) throw InvalidArgument("trace_functional: point index out of range");
  const DerivativeSide s = side.value_or(detail::default_side(space));
  const Eigen::VectorXd d = sampled->row_distances(tau, i);
  const Eigen::VectorXd w = sampled->weights(tau);
  const double delta = domain == Domain::ball ? 0.0 : sampled->shell_half_width(tau, eps);
  double num = 0.0, den = 0.0;
  std::size_t count = 0;
  for (Eigen::Index j = 0; j < d.size(); ++j) {
    const bool in = domain == Domain::ball ? d[j] <= eps : (d[j] >= eps - delta && d[j] <= eps + delta && d[j] > 0.0);
    if (!in || w[j] <= 0.0) continue;
    ++count;
    const double rate = space.is_static() ? 0.0 : d2_time_derivative(space, tau, i, std::size_t(j), s, steps);
    num += w[j] * (domain == Domain::ball ? rate / (eps * eps) : rate / (d[j] * d[j]));
    den += w[j];
  }
  if (count == 0 || !(den > 0.0))
    throw DegenerateSupport(i, std::string(to_string(domain)) + " of radius " + format_number(eps) + " is empty");
  if (count < min_support_points)
    warn("trace_functional: only " + std::to_string(count) + " support points at point " + std::to_string(i));
  return detail::backward_sign(space) * num / den;
}

struct TraceEstimate {
  double mean = 0.0;  // center average of the extrapolated values
  double min = 0.0;
  double max = 0.0;
  std::vector<std::size_t> centers;
  std::vector<LimitFit> fits;
};

// eps -> 0 extrapolation of the trace functional at each center.
inline TraceEstimate extrapolated_trace(const Space& space, double tau, const std::vector<std::size_t>& centers,
                                        Domain domain, std::optional<DerivativeSide> side = std::nullopt,
                                        std::vector<double> ladder = {}) {
  if (centers.empty()) throw InvalidArgument("extrapolated_trace: needs at least one center");
  TraceEstimate est;
  est.centers = centers;
  est.fits.resize(centers.size());
  parallel_for(centers.size(), [&](std::size_t k) {
    auto lad = ladder.empty() ? default_ladder(space, tau, centers[k], domain == Domain::ball) : ladder;
    std::vector<double> values;
    for (double e : lad) values.push_back(trace_functional(space, tau, centers[k], e, domain, side));
    est.fits[k] = fit_even_powers(lad, values);
  });
  est.min = std::numeric_limits<double>::infinity();
  est.max = -est.min;
  for (const auto& f : est.fits) {
    est.mean += f.c0 / centers.size();
    est.min = std::min(est.min, f.c0);
    est.max = std::max(est.max, f.c0);
  }
  return est;
}

enum class SaturationVariant { ball, sphere };
enum class ConstantMode { self_consistent, theorem, weak_flow };

inline const char* to_string(ConstantMode m) {
  switch (m) {
    case ConstantMode::self_consistent: return "self-consistent";
    case ConstantMode::theorem: return "theorem";
    case ConstantMode::weak_flow: return "weak-flow";
  }
  return "?";
}

inline ConstantMode parse_constant_mode(std::string_view s) {
  if (s == "self-consistent") return ConstantMode::self_consistent;
  if (s == "theorem") return ConstantMode::theorem;
  if (s == "weak-flow") return ConstantMode::weak_flow;
  throw InvalidArgument("unknown constant mode '" + std::string(s) + "' (expected self-consistent, theorem or weak-flow)");
}

struct SaturationConfig {
  SaturationVariant variant = SaturationVariant::ball;
  ConstantMode constant_mode = ConstantMode::self_consistent;
  std::vector<double> epsilon_ladder;  // empty: default ladder
  std::optional<DerivativeSide> derivative_side;
  std::vector<std::size_t> core;  // empty: all points
  FitOptions fit;
  double slack = 0.05;
};

// Weight of the volume term. The literal theorem and weak-flow displays do not
// cancel on the round-sphere Ricci flow; 12 in both forms does.
inline double saturation_constant(SaturationVariant v, ConstantMode mode, int n) {
  switch (mode) {
    case ConstantMode::self_consistent: return 12.0;
    case ConstantMode::theorem: return v == SaturationVariant::ball ? 12.0 : 12.0 * n / (n + 2.0);
    case ConstantMode::weak_flow: return v == SaturationVariant::ball ? 12.0 * (n + 2.0) / n : 12.0 * n / (n + 2.0);
  }
  return 12.0;
}

// Per-rung bracket C (vol ratio - 1) / eps^2 + trace, extrapolated to eps -> 0.
inline LimitFit saturation_defect(const Space& space, double tau, std::size_t i, const SaturationConfig& config) {
  require_time(space, tau, "saturation_defect");
  const bool ball = config.variant == SaturationVariant::ball;
  std::vector<double> ladder = config.epsilon_ladder;
  if (ladder.empty()) ladder = default_ladder(space, tau, i, ball);
  validate_ladder(ladder);
  const int n = space.dimension();
  const double c = saturation_constant(config.variant, config.constant_mode, n);
  const Domain domain = ball ? Domain::ball : Domain::sphere;
  std::vector<double> values;
  for (double eps : ladder) {
    const double ratio = ball ? space.ball_measure(tau, i, eps) / (unit_ball_volume(n) * std::pow(eps, n))
                              : space.sphere_area(tau, i, eps) / (unit_sphere_area(n) * std::pow(eps, n - 1));
    const double trace = trace_functional(space, tau, i, eps, domain, config.derivative_side);
    values.push_back(c * (ratio - 1.0) / (eps * eps) + trace);
  }
  return fit_even_powers(ladder, values, config.fit);
}

// WSRF on the heat space plus saturation at every core point.
struct WeakFlowInputs {
  const Space* heat_space = nullptr;  // forward view; defaults to the space itself
  ScalarField f0;
  std::vector<double> time_grid;
  ChernoffSchedule schedule;
  WsrfOptions options;
};

inline std::vector<std::size_t> resolve_core(const Space& space, double tau, const std::vector<std::size_t>& core) {
  const std::size_t n = detail::is_model(space) && space.size() == 0 ? 1 : space.size();
  if (core.empty()) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  std::vector<char> in(n, 0);
  for (std::size_t i : core) {
    if (i >= n) throw InvalidArgument("core index " + std::to_string(i) + " out of range");
    in[i] = 1;
  }
  if (space.size() > 0) {
    const Eigen::VectorXd w = space.weights(tau);
    for (std::size_t i = 0; i < n; ++i)
      if (!in[i] && w[i] > 0.0)
        throw InvalidArgument("core must contain every positive-weight point (missing " + std::to_string(i) + ")");
  }
  std::vector<std::size_t> out = core;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline VerdictReport check_saturation(const Space& space, double tau, const SaturationConfig& config) {
  VerdictReport rep;
  rep.check = "saturation";
  rep.tolerances["slack_sat"] = config.slack;
  const auto core = resolve_core(space, tau, config.core);
  std::vector<std::optional<LimitFit>> fits(core.size());
  std::vector<std::string> errors(core.size());
  if (detail::is_model(space)) {
    // homogeneous: one evaluation serves every point
    const auto fit = saturation_defect(space, tau, core.front(), config);
    for (auto& f : fits) f = fit;
  } else {
    parallel_for(core.size(), [&](std::size_t k) {
      try {
        fits[k] = saturation_defect(space, tau, core[k], config);
      } catch (const DegenerateSupport& e) {
        errors[k] = e.what();
      }
    });
  }
  double lowest = std::numeric_limits<double>::infinity(), highest = -lowest;
  std::size_t failed = 0, skipped = 0;
  for (std::size_t k = 0; k < core.size(); ++k) {
    if (!fits[k]) {
      ++skipped;
      if (rep.reason.empty()) rep.reason = "degenerate support: " + errors[k];
      continue;
    }
    const double c0 = fits[k]->c0;
    rep.series.push_back({"defect", static_cast<double>(core[k]), c0});
    lowest = std::min(lowest, c0);
    highest = std::max(highest, c0);
    if (c0 < -config.slack) {
      ++failed;
      detail::add_witness(rep, {tau, {core[k]}, c0, "extrapolated defect below -slack"});
    }
  }
  if (fits.front()) rep.fits.push_back({"defect@" + std::to_string(core.front()), *fits.front()});
  rep.verdict = failed > 0 ? Verdict::fail : (skipped > 0 ? Verdict::inconclusive : Verdict::pass);
  rep.details["variant"] = config.variant == SaturationVariant::ball ? "ball" : "sphere";
  rep.details["constant_mode"] = to_string(config.constant_mode);
  rep.details["constant"] = saturation_constant(config.variant, config.constant_mode, space.dimension());
  rep.details["core_size"] = core.size();
  rep.details["failed_points"] = failed;
  rep.details["skipped_points"] = skipped;
  rep.details["min_defect"] = lowest;
  rep.details["max_defect"] = highest;
  return rep;
}

inline VerdictReport check_weak_ricci_flow(const Space& space, double tau, const WeakFlowInputs& wsrf,
                                           const SaturationConfig& config) {
  const Space& heat = wsrf.heat_space ? *wsrf.heat_space : space;
  auto w = check_wsrf(heat, wsrf.f0, wsrf.time_grid, wsrf.schedule, wsrf.options);
  auto s = check_saturation(space, tau, config);
  VerdictReport rep;
  rep.check = "weak-ricci-flow";
  rep.verdict = combine(w.verdict, s.verdict);
  rep.reason = !w.reason.empty() ? w.reason : s.reason;
  rep.witnesses = w.witnesses;
  for (auto& x : s.witnesses) detail::add_witness(rep, x);
  rep.tolerances = w.tolerances;
  rep.tolerances.insert(s.tolerances.begin(), s.tolerances.end());
  rep.fits = s.fits;
  rep.series = w.series;
  rep.series.insert(rep.series.end(), s.series.begin(), s.series.end());
  rep.details["wsrf"] = to_string(w.verdict);
  rep.details["saturation"] = to_string(s.verdict);
  rep.details["wsrf_details"] = w.details;
  rep.details["saturation_details"] = s.details;
  return rep;
}

// ---------------------------------------------------------------------------
// implication cross-check

struct CrosscheckCase {
  std::string flow;
  std::string cost;
  Verdict contraction = Verdict::inconclusive;
  Verdict wsrf = Verdict::inconclusive;
};

// Fails when some flow contracts a convex cost yet violates WSRF.
inline VerdictReport crosscheck(const std::vector<CrosscheckCase>& cases) {
  VerdictReport rep;
  rep.check = "crosscheck";
  std::size_t premises = 0;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto& c = cases[k];
    rep.details["cases"].push_back(
        {{"flow", c.flow}, {"cost", c.cost}, {"contraction", to_string(c.contraction)}, {"wsrf", to_string(c.wsrf)}});
    if (c.contraction != Verdict::pass) continue;
    ++premises;
    if (c.wsrf == Verdict::fail) {
      rep.verdict = Verdict::fail;
      detail::add_witness(rep, {0.0, {k}, 0.0, c.flow + " contracts " + c.cost + " but fails WSRF"});
    } else if (c.wsrf == Verdict::inconclusive && rep.verdict == Verdict::pass) {
      rep.verdict = Verdict::inconclusive;
      rep.reason = c.flow + ": WSRF inconclusive";
    }
  }
  rep.details["premises"] = premises;
  return rep;
}

}  // namespace weakflow
