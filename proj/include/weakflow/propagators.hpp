#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "weakflow/averaging.hpp"

namespace weakflow {

enum class ScheduleMode { double_limit, single_limit };

inline const char* to_string(ScheduleMode m) {
  return m == ScheduleMode::double_limit ? "double" : "single";
}

inline ScheduleMode parse_schedule_mode(std::string_view s) {
  if (s == "double") return ScheduleMode::double_limit;
  if (s == "single") return ScheduleMode::single_limit;
  throw InvalidArgument("unknown schedule mode '" + std::string(s) + "'");
}

// Stage counts of a Chernoff product. Radii are derived from the time step.
struct ChernoffSchedule {
  int outer = 1;  // m
  int inner = 1;  // j
  ScheduleMode mode = ScheduleMode::double_limit;
  OperatorKind kernel = OperatorKind::nu;

  void validate() const {
    if (outer < 1) throw InvalidArgument("schedule: outer stage count m must be >= 1");
    if (inner < 1) throw InvalidArgument("schedule: inner stage count j must be >= 1");
  }
};

// Constant c in r = sqrt(c * step) for a kernel in dimension n.
inline double radius_constant(OperatorKind kernel, int n) {
  switch (kernel) {
    case OperatorKind::nu: return 2.0 * (n + 2);
    case OperatorKind::sigma: return 2.0 * n;
    case OperatorKind::beta: return 8.0 * (n + 2);
    case OperatorKind::alpha: return 8.0 * n;
    default: throw InvalidArgument(std::string("'") + to_string(kernel) + "' is not a propagator kernel");
  }
}

// Radius of one application covering `elapsed` time split into `count` applications.
inline double chernoff_radius(OperatorKind kernel, int n, double elapsed, int count) {
  return std::sqrt(radius_constant(kernel, n) * elapsed / count);
}

struct StageRecord {
  double time = 0.0;  // frozen slice
  double radius = 0.0;
  double sup_norm = 0.0;  // after this application
};

struct PropagationResult {
  ScalarField field;
  std::vector<StageRecord> stage_log;
  std::optional<Eigen::VectorXd> converged_estimate;
};

namespace detail {

inline void require_heat_kernel(OperatorKind k) {
  if (k != OperatorKind::nu && k != OperatorKind::sigma)
    throw InvalidArgument(std::string("heat propagators need kernel nu or sigma, got ") + to_string(k));
}

inline void require_conjugate_kernel(OperatorKind k) {
  if (k != OperatorKind::beta && k != OperatorKind::alpha)
    throw InvalidArgument(std::string("conjugate propagators need kernel beta or alpha, got ") + to_string(k));
}

inline void require_order(double a, double b, const char* who) {
  if (!(a <= b) && !same_time(a, b)) throw InvalidArgument(std::string(who) + ": needs start <= end");
}

// Applies the operator at slice t and radius r `count` times.
inline void iterate(const Space& space, OperatorKind kind, double t, double r, int count, Eigen::VectorXd& u,
                    std::vector<StageRecord>& log) {
  if (r == 0.0) {
    for (int k = 0; k < count; ++k) log.push_back({t, 0.0, u.cwiseAbs().maxCoeff()});
    return;
  }
  if (kind == OperatorKind::theta || kind == OperatorKind::eta) {
    const Eigen::VectorXd d = ratio_vector(space, kind == OperatorKind::eta, t, r);
    for (int k = 0; k < count; ++k) {
      u = d.cwiseProduct(u);
      log.push_back({t, r, u.cwiseAbs().maxCoeff()});
    }
    return;
  }
  const Eigen::MatrixXd a = operator_matrix(space, kind, t, r);
  for (int k = 0; k < count; ++k) {
    u = a * u;
    log.push_back({t, r, u.cwiseAbs().maxCoeff()});
  }
}

// m frozen-slice stages over [a, b], earliest time first.
inline PropagationResult compose(const Space& space, double a, double b, const ChernoffSchedule& s,
                                 const ScalarField& f) {
  const int n = space.dimension();
  const double elapsed = b - a;
  Eigen::VectorXd u = f.values;
  std::vector<StageRecord> log;
  log.reserve(std::size_t(s.outer) * (s.mode == ScheduleMode::double_limit ? s.inner : 1));
  const double step = elapsed / s.outer;
  for (int l = 0; l < s.outer; ++l) {
    const double t = space.is_static() ? a : a + l * step;
    if (s.mode == ScheduleMode::single_limit)
      iterate(space, s.kernel, t, chernoff_radius(s.kernel, n, elapsed, s.outer), 1, u, log);
    else
      iterate(space, s.kernel, t, chernoff_radius(s.kernel, n, step, s.inner), s.inner, u, log);
  }
  return {make_field(space, b, std::move(u)), std::move(log), std::nullopt};
}

}  // namespace detail

// (A_r)^j f on the frozen slice t_fixed, with r from the inner stage count.
inline PropagationResult static_heat(const Space& space, double t_fixed, double s1, double s2,
                                     const ChernoffSchedule& schedule, const ScalarField& f) {
  schedule.validate();
  detail::require_heat_kernel(schedule.kernel);
  detail::require_order(s1, s2, "static_heat");
  require_field(space, f, t_fixed, "static_heat");
  PropagationResult out{f, {}, std::nullopt};
  const double r = chernoff_radius(schedule.kernel, space.dimension(), s2 - s1, schedule.inner);
  detail::iterate(space, schedule.kernel, t_fixed, r, schedule.inner, out.field.values, out.stage_log);
  return out;
}

// Heat propagation from s1 to s2 along a forward flow; f is tagged at s1.
inline PropagationResult dynamic_heat(const Space& space, double s1, double s2, const ChernoffSchedule& schedule,
                                      const ScalarField& f) {
  schedule.validate();
  detail::require_heat_kernel(schedule.kernel);
  detail::require_order(s1, s2, "dynamic_heat");
  if (!space.is_static() && space.orientation() != Orientation::forward)
    throw InvalidArgument("dynamic_heat: needs a forward-oriented space (use reversed())");
  require_field(space, f, s1, "dynamic_heat");
  require_time(space, s2, "dynamic_heat");
  return detail::compose(space, s1, s2, schedule, f);
}

inline void warn_unless_psc(const Space& space, const char* who) {
  const auto hint = space.virtually_psc_hint();
  if (!hint || !*hint) warn(std::string(who) + ": space is not flagged virtually psc; no norm guarantee");
}

inline PropagationResult static_conjugate(const Space& space, double tau_fixed, double tau1, double tau2,
                                          const ChernoffSchedule& schedule, const ScalarField& f) {
  schedule.validate();
  detail::require_conjugate_kernel(schedule.kernel);
  detail::require_order(tau1, tau2, "static_conjugate");
  require_field(space, f, tau_fixed, "static_conjugate");
  warn_unless_psc(space, "static_conjugate");
  PropagationResult out{f, {}, std::nullopt};
  const double r = chernoff_radius(schedule.kernel, space.dimension(), tau2 - tau1, schedule.inner);
  detail::iterate(space, schedule.kernel, tau_fixed, r, schedule.inner, out.field.values, out.stage_log);
  return out;
}

// Conjugate propagation from tau1 to tau2 along a backward flow; f is tagged at tau1.
inline PropagationResult dynamic_conjugate(const Space& space, double tau1, double tau2,
                                           const ChernoffSchedule& schedule, const ScalarField& f) {
  schedule.validate();
  detail::require_conjugate_kernel(schedule.kernel);
  detail::require_order(tau1, tau2, "dynamic_conjugate");
  if (!space.is_static() && space.orientation() != Orientation::backward)
    throw InvalidArgument("dynamic_conjugate: needs a backward-oriented space (use reversed())");
  require_field(space, f, tau1, "dynamic_conjugate");
  require_time(space, tau2, "dynamic_conjugate");
  warn_unless_psc(space, "dynamic_conjugate");
  return detail::compose(space, tau1, tau2, schedule, f);
}

// Discrete delta at node y: density 1 / weight(y) there, 0 elsewhere.
inline ScalarField delta_density(const Space& space, double t, std::size_t y) {
  if (y >= space.size()) throw InvalidArgument("delta: node index out of range");
  const double w = space.weights(t)[y];
  if (!(w > 0.0)) throw DegenerateSupport(y, "delta at a zero-weight node");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(space.size());
  v[y] = 1.0 / w;
  return make_field(space, t, std::move(v));
}

// Heat propagation of the delta at y from s1 to s2.
inline ScalarField heat_kernel(const Space& space, double s1, double s2, std::size_t y,
                               const ChernoffSchedule& schedule) {
  return dynamic_heat(space, s1, s2, schedule, delta_density(space, s1, y)).field;
}

// |conjugate(tau0 -> tau) g at y - sum_x K(x) g(x) w_tau0(x)|, where K is the
// heat kernel of the delta at y carried from tau back to tau0 on the forward view.
inline double duality_gap(const Space& space, double tau0, double tau, const ScalarField& g, std::size_t y,
                          const ChernoffSchedule& conjugate, const ChernoffSchedule& heat) {
  if (!space.is_static() && space.orientation() != Orientation::backward)
    throw InvalidArgument("duality_gap: needs a backward-oriented space");
  detail::require_order(tau0, tau, "duality_gap");
  require_field(space, g, tau0, "duality_gap");
  if (y >= space.size()) throw InvalidArgument("duality_gap: node index out of range");
  const double left = dynamic_conjugate(space, tau0, tau, conjugate, g).field.values[y];
  const auto forward = space.reversed(tau);
  const Eigen::VectorXd k = heat_kernel(*forward, 0.0, tau - tau0, y, heat).values;
  const double right = (k.array() * g.values.array() * space.weights(tau0).array()).sum();
  return std::abs(left - right);
}

inline double duality_gap(const Space& space, double tau0, double tau, const ScalarField& g, std::size_t y,
                          const ChernoffSchedule& schedule) {
  ChernoffSchedule heat = schedule;
  heat.kernel = schedule.kernel == OperatorKind::alpha ? OperatorKind::sigma : OperatorKind::nu;
  ChernoffSchedule conj = schedule;
  conj.kernel = schedule.kernel == OperatorKind::sigma || schedule.kernel == OperatorKind::alpha
                    ? OperatorKind::alpha
                    : OperatorKind::beta;
  return duality_gap(space, tau0, tau, g, y, conj, heat);
}

// ---------------------------------------------------------------------------
// refinement studies

struct RefinementRow {
  int m = 0;
  int j = 0;
  double sup_change = 0.0;  // vs the previous row; NaN on the first
  double wall_time = 0.0;   // seconds
};

struct RefinementStudy {
  std::vector<RefinementRow> rows;
  PropagationResult final;
  bool converged = false;
};

// Doubles m (and j in double-limit mode) until successive fields differ by less than `tolerance` in
// sup norm or `max_doublings` is reached. The converged estimate is the
// first-order Richardson combination of the last two fields.
inline RefinementStudy refine(const std::function<PropagationResult(const ChernoffSchedule&)>& run,
                              ChernoffSchedule start, double tolerance, int max_doublings) {
  if (!(tolerance > 0.0)) throw InvalidArgument("refine: tolerance must be positive");
  if (max_doublings < 0) throw InvalidArgument("refine: max_doublings must be >= 0");
  RefinementStudy study;
  std::optional<Eigen::VectorXd> previous;
  ChernoffSchedule s = start;
  for (int k = 0; k <= max_doublings; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    PropagationResult r = run(s);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    RefinementRow row{s.outer, s.inner, std::numeric_limits<double>::quiet_NaN(), secs};
    if (previous) {
      row.sup_change = (r.field.values - *previous).cwiseAbs().maxCoeff();
      r.converged_estimate = 2.0 * r.field.values - *previous;
    }
    study.rows.push_back(row);
    previous = r.field.values;
    study.final = std::move(r);
    if (k > 0 && row.sup_change < tolerance) {
      study.converged = true;
      break;
    }
    s.outer *= 2;
    if (s.mode == ScheduleMode::double_limit) s.inner *= 2;
  }
  return study;
}

inline std::string refinement_csv(const RefinementStudy& study) {
  std::string out = "m,j,sup_change,wall_time\n";
  for (const auto& r : study.rows)
    out += std::to_string(r.m) + "," + std::to_string(r.j) + "," + format_number(r.sup_change) + "," +
           format_number(r.wall_time) + "\n";
  return out;
}

inline nlohmann::json to_json(const PropagationResult& r) {
  nlohmann::json log = nlohmann::json::array();
  for (const auto& s : r.stage_log) log.push_back({{"time", s.time}, {"radius", s.radius}, {"sup", s.sup_norm}});
  nlohmann::json j{{"field", to_json(r.field)}, {"stage_log", log}};
  if (r.converged_estimate)
    j["converged_estimate"] =
        std::vector<double>(r.converged_estimate->data(), r.converged_estimate->data() + r.converged_estimate->size());
  return j;
}

}  // namespace weakflow
