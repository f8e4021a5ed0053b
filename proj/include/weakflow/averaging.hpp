#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "weakflow/geometry.hpp"

namespace weakflow {

// Per-node ratio multipliers: eta (ball volume over omega_n r^n) or theta
// (sphere area over a_{n-1} r^{n-1}).
inline Eigen::VectorXd ratio_vector(const Space& space, bool ball, double t, double r) {
  const int n = space.dimension();
  const std::size_t count = space.size();
  const double norm = ball ? unit_ball_volume(n) * std::pow(r, n) : unit_sphere_area(n) * std::pow(r, n - 1);
  auto ratio_at = [&](std::size_t i) {
    const double m = ball ? space.ball_measure(t, i, r) : space.sphere_area(t, i, r);
    if (!(m > 0.0))
      throw DegenerateSupport(i, std::string(ball ? "ball" : "sphere") + " of radius " + std::to_string(r) +
                                     " has zero measure");
    return m / norm;
  };
  if (dynamic_cast<const ModelSpace*>(&space) != nullptr)
    return Eigen::VectorXd::Constant(count, ratio_at(0));
  Eigen::VectorXd out(count);
  parallel_for(count, [&](std::size_t i) { out[i] = ratio_at(i); });
  return out;
}

// Matrix of an averaging operator acting on node values. Radius 0 gives the identity.
inline Eigen::MatrixXd operator_matrix(const Space& space, OperatorKind kind, double t, double r) {
  require_time(space, t, "operator_matrix");
  if (r < 0.0 || !std::isfinite(r)) throw InvalidArgument("averaging radius must be finite and >= 0");
  const std::size_t count = space.size();
  if (r == 0.0) return Eigen::MatrixXd::Identity(count, count);
  switch (kind) {
    case OperatorKind::sigma: return space.mean_matrix(false, t, r);
    case OperatorKind::nu: return space.mean_matrix(true, t, r);
    case OperatorKind::theta: return ratio_vector(space, false, t, r).asDiagonal();
    case OperatorKind::eta: return ratio_vector(space, true, t, r).asDiagonal();
    case OperatorKind::alpha: {
      Eigen::MatrixXd m = 0.25 * space.mean_matrix(false, t, r);
      m.diagonal() += 0.75 * ratio_vector(space, false, t, r);
      return m;
    }
    case OperatorKind::beta: {
      Eigen::MatrixXd m = 0.25 * space.mean_matrix(true, t, r);
      m.diagonal() += 0.75 * ratio_vector(space, true, t, r);
      return m;
    }
  }
  throw InvalidArgument("unknown operator kind");
}

inline ScalarField apply(OperatorKind kind, const Space& space, double t, double r, const ScalarField& f) {
  require_field(space, f, t, "apply");
  if (r == 0.0) return f;
  ScalarField out = f;
  switch (kind) {
    case OperatorKind::theta:
      out.values = ratio_vector(space, false, t, r).cwiseProduct(f.values);
      break;
    case OperatorKind::eta:
      out.values = ratio_vector(space, true, t, r).cwiseProduct(f.values);
      break;
    default:
      out.values = operator_matrix(space, kind, t, r) * f.values;
  }
  return out;
}

// Value of the operator at a single node.
inline double apply_row(OperatorKind kind, const Space& space, double t, double r, const ScalarField& f,
                        std::size_t i) {
  require_field(space, f, t, "apply");
  if (r == 0.0) return f.values[i];
  const auto* sampled = dynamic_cast<const SampledSpace*>(&space);
  if (!sampled) return operator_matrix(space, kind, t, r).row(i).dot(f.values);
  const int n = space.dimension();
  const Eigen::VectorXd d = sampled->row_distances(t, i);
  const Eigen::VectorXd w = sampled->weights(t);
  auto mean = [&](bool ball) {
    const double delta = ball ? 0.0 : sampled->shell_half_width(t, r);
    double num = 0.0, den = 0.0;
    std::size_t members = 0;
    for (Eigen::Index j = 0; j < d.size(); ++j)
      if (ball ? d[j] <= r : (d[j] >= r - delta && d[j] <= r + delta)) {
        num += w[j] * f.values[j];
        den += w[j];
        ++members;
      }
    if (!(den > 0.0)) throw DegenerateSupport(i, "averaging support carries no mass");
    if (ball && members == 1) warn("ball around point " + std::to_string(i) + " contains only its center");
    return num / den;
  };
  auto ratio = [&](bool ball) {
    const double m = ball ? sampled->ball_measure(t, i, r) : sampled->sphere_area(t, i, r);
    if (!(m > 0.0)) throw DegenerateSupport(i, "ratio support has zero measure");
    return ball ? m / (unit_ball_volume(n) * std::pow(r, n)) : m / (unit_sphere_area(n) * std::pow(r, n - 1));
  };
  switch (kind) {
    case OperatorKind::sigma: return mean(false);
    case OperatorKind::nu: return mean(true);
    case OperatorKind::theta: return ratio(false) * f.values[i];
    case OperatorKind::eta: return ratio(true) * f.values[i];
    case OperatorKind::alpha: return 0.25 * mean(false) + 0.75 * ratio(false) * f.values[i];
    case OperatorKind::beta: return 0.25 * mean(true) + 0.75 * ratio(true) * f.values[i];
  }
  return 0.0;
}

// Operator applied to a callable field at a point of a model space, by quadrature.
inline double apply_at(OperatorKind kind, const ModelSpace& space, double t, double r, const PointFunction& f,
                       const Point& x0) {
  require_time(space, t, "apply_at");
  if (r < 0.0) throw InvalidArgument("averaging radius must be nonnegative");
  const Point x = space.normalize(x0);
  if (r == 0.0) return f(x);
  const int n = space.dimension();
  auto mean = [&](bool ball) {
    const auto q = ball ? space.ball_quadrature(t, x, r) : space.sphere_quadrature(t, x, r);
    double s = 0.0;
    for (const auto& p : q) s += p.w * f(p.y);
    return s;
  };
  auto ratio = [&](bool ball) {
    if (ball) return space.ball_volume(t, r) / (unit_ball_volume(n) * std::pow(r, n));
    const double a = space.shell_area(t, r);
    if (!(a > 0.0)) throw DegenerateSupport(0, "sphere of radius " + std::to_string(r) + " is empty");
    return a / (unit_sphere_area(n) * std::pow(r, n - 1));
  };
  switch (kind) {
    case OperatorKind::sigma: return mean(false);
    case OperatorKind::nu: return mean(true);
    case OperatorKind::theta: return ratio(false) * f(x);
    case OperatorKind::eta: return ratio(true) * f(x);
    case OperatorKind::alpha: return 0.25 * mean(false) + 0.75 * ratio(false) * f(x);
    case OperatorKind::beta: return 0.25 * mean(true) + 0.75 * ratio(true) * f(x);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// r -> 0 extrapolation

struct LimitFit {
  double c0 = 0.0;
  double c2 = 0.0;
  std::optional<double> c4;
  double residual = 0.0;  // root-mean-square misfit over the ladder
  std::vector<double> ladder;
  std::vector<double> values;
};

struct FitOptions {
  bool quartic = true;  // used only when the ladder has >= 6 rungs
  double max_condition = 1e8;
};

inline void validate_ladder(const std::vector<double>& ladder) {
  if (ladder.size() < 4) throw InvalidArgument("ladder needs at least 4 rungs");
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    if (!(ladder[k] > 0.0) || !std::isfinite(ladder[k])) throw InvalidArgument("ladder radii must be positive");
    if (k > 0 && !(ladder[k] < ladder[k - 1])) throw InvalidArgument("ladder must be strictly decreasing");
  }
}

// Least-squares fit of values ~ c0 + c2 r^2 (+ c4 r^4).
inline LimitFit fit_even_powers(const std::vector<double>& ladder, const std::vector<double>& values,
                                FitOptions options = {}) {
  validate_ladder(ladder);
  if (values.size() != ladder.size()) throw InvalidArgument("one value per rung required");
  for (double v : values)
    if (!std::isfinite(v)) throw UnstableFit("non-finite value on the ladder");
  const bool quartic = options.quartic && ladder.size() >= 6;
  const int cols = quartic ? 3 : 2;
  const double rmax = ladder.front();
  const Eigen::Index rows = static_cast<Eigen::Index>(ladder.size());
  Eigen::MatrixXd a(rows, cols);
  Eigen::VectorXd b(rows);
  for (Eigen::Index k = 0; k < rows; ++k) {
    const double rho2 = (ladder[k] / rmax) * (ladder[k] / rmax);
    a(k, 0) = 1.0;
    a(k, 1) = rho2;
    if (quartic) a(k, 2) = rho2 * rho2;
    b[k] = values[k];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cond = s[0] / s[s.size() - 1];
  if (!(cond <= options.max_condition))
    throw UnstableFit("fit condition number " + std::to_string(cond) + " exceeds " +
                      std::to_string(options.max_condition));
  const Eigen::VectorXd c = svd.solve(b);
  LimitFit fit;
  fit.c0 = c[0];
  fit.c2 = c[1] / (rmax * rmax);
  if (quartic) fit.c4 = c[2] / (rmax * rmax * rmax * rmax);
  fit.residual = std::sqrt((a * c - b).squaredNorm() / rows);
  fit.ladder = ladder;
  fit.values = values;
  return fit;
}

inline std::vector<double> geometric_ladder(double rmax, double ratio, int rungs) {
  std::vector<double> out;
  for (int k = 0; k < rungs; ++k) out.push_back(rmax * std::pow(ratio, k));
  return out;
}

// Radius whose ball holds the given fraction of the total mass.
inline double mass_radius(const ModelSpace& space, double t, double fraction) {
  const double target = fraction * space.total_volume(t);
  double lo = 0.0, hi = space.diameter(t);
  if (!space.is_sphere() && space.dimension() > 2) hi = space.injectivity_radius(t);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (space.ball_volume(t, mid) <= target ? lo : hi) = mid;
  }
  return lo;
}

inline std::vector<double> default_ladder(const ModelSpace& space, double t) {
  double rmax = mass_radius(space, t, 0.2);
  if (!space.is_sphere()) rmax = std::min(rmax, space.injectivity_radius(t));
  return geometric_ladder(rmax, 0.5, 6);
}

inline constexpr std::size_t min_support_points = 30;

// Default ladder at a node. On sampled spaces rungs with fewer than 30
// support points are dropped; if fewer than 4 rungs survive the ratio is
// refined from 1/2 to 1/sqrt(2).
inline std::vector<double> default_ladder(const Space& space, double t, std::size_t i, bool ball_support) {
  if (const auto* model = dynamic_cast<const ModelSpace*>(&space)) return default_ladder(*model, t);
  const auto* sampled = dynamic_cast<const SampledSpace*>(&space);
  if (!sampled) throw InvalidArgument("default_ladder: unsupported space type");
  const Eigen::VectorXd d = sampled->row_distances(t, i);
  const Eigen::VectorXd w = sampled->weights(t);
  std::vector<Eigen::Index> order(d.size());
  for (Eigen::Index k = 0; k < d.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return d[a] < d[b]; });
  const double target = 0.2 * w.sum();
  double acc = 0.0, rmax = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    acc += w[order[k]];
    if (acc > target) break;
    const bool tie_next = k + 1 < order.size() && d[order[k + 1]] == d[order[k]];
    if (!tie_next) rmax = d[order[k]];
  }
  if (!(rmax > 0.0)) throw DegenerateSupport(i, "no radius holds a positive mass below 20% of the total");
  for (double ratio : {0.5, std::sqrt(0.5)}) {
    std::vector<double> rungs;
    for (double r : geometric_ladder(rmax, ratio, 12)) {
      if (sampled->support_count(ball_support, t, i, r) < min_support_points) break;
      rungs.push_back(r);
      if (rungs.size() == 6) break;
    }
    if (rungs.size() >= 4) return rungs;
  }
  throw DegenerateSupport(i, "fewer than 4 ladder rungs carry 30 support points");
}

inline LimitFit expansion_fit(OperatorKind kind, const ModelSpace& space, double t, const Point& x,
                              const PointFunction& f, std::vector<double> ladder = {},
                              FitOptions options = {}) {
  if (ladder.empty()) ladder = default_ladder(space, t);
  validate_ladder(ladder);
  std::vector<double> values;
  for (double r : ladder) values.push_back(apply_at(kind, space, t, r, f, x));
  return fit_even_powers(ladder, values, options);
}

inline LimitFit expansion_fit(OperatorKind kind, const Space& space, double t, std::size_t i,
                              const ScalarField& f, std::vector<double> ladder = {}, FitOptions options = {}) {
  require_field(space, f, t, "expansion_fit");
  if (ladder.empty()) ladder = default_ladder(space, t, i, is_ball_kind(kind));
  validate_ladder(ladder);
  if (const auto* sampled = dynamic_cast<const SampledSpace*>(&space)) {
    for (double r : ladder) {
      const std::size_t c = sampled->support_count(is_ball_kind(kind), t, i, r);
      if (c < min_support_points)
        throw DegenerateSupport(i, "rung r=" + std::to_string(r) + " has " + std::to_string(c) +
                                       " support points (< 30)");
    }
  }
  std::vector<double> values;
  for (double r : ladder) values.push_back(apply_row(kind, space, t, r, f, i));
  return fit_even_powers(ladder, values, options);
}

// ---------------------------------------------------------------------------
// export

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const char* limit_fit_csv_header() { return "kind,x,c0,c2,residual"; }

inline std::string limit_fit_csv_row(OperatorKind kind, const std::string& x, const LimitFit& fit) {
  return std::string(to_string(kind)) + "," + x + "," + format_number(fit.c0) + "," + format_number(fit.c2) +
         "," + format_number(fit.residual);
}

inline nlohmann::json to_json(const LimitFit& fit) {
  nlohmann::json j{{"c0", fit.c0}, {"c2", fit.c2}, {"residual", fit.residual}, {"ladder", fit.ladder},
                   {"values", fit.values}};
  if (fit.c4) j["c4"] = *fit.c4;
  return j;
}

inline nlohmann::json to_json(const ScalarField& f) {
  return {{"time", f.time},
          {"values", std::vector<double>(f.values.data(), f.values.data() + f.values.size())}};
}

}  // namespace weakflow
