#pragma once

#include <random>
#include <vector>

#include "weakflow/model_space.hpp"
#include "weakflow/sampled_space.hpp"

namespace weakflow {

inline double ball_measure(const Space& space, double t, std::size_t i, double r) {
  require_time(space, t, "ball_measure");
  if (r < 0.0) throw InvalidArgument("ball_measure: radius must be nonnegative");
  return space.ball_measure(t, i, r);
}

inline double ball_measure(const ModelSpace& space, double t, const Point&, double r) {
  require_time(space, t, "ball_measure");
  return space.ball_volume(t, r);
}

inline const std::vector<double>& default_time_steps() {
  static const std::vector<double> steps{1e-2, 1e-3, 1e-4};
  return steps;
}

namespace detail {

// One-sided difference quotients of g over a shrinking step ladder, Richardson
// extrapolated; upper/lower take the max/min over the ladder tail.
template <class G>
double dini_derivative(G&& g, double t, TimeInterval iv, DerivativeSide side,
                       const std::vector<double>& steps) {
  if (steps.empty()) throw InvalidArgument("derivative ladder is empty");
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (!(steps[k] > 0.0)) throw InvalidArgument("derivative steps must be positive");
    if (k > 0 && !(steps[k] < steps[k - 1])) throw InvalidArgument("derivative ladder must decrease");
  }
  const double g0 = g(t);
  std::vector<double> tail;
  for (int dir : {+1, -1}) {
    std::vector<std::pair<double, double>> q;
    for (double h : steps) {
      const double s = t + dir * h;
      if (!iv.contains(s)) continue;
      q.emplace_back(h, dir * (g(s) - g0) / h);
    }
    if (q.empty()) continue;
    if (q.size() == 1) {
      tail.push_back(q[0].second);
      continue;
    }
    std::vector<double> rich;
    for (std::size_t k = 0; k + 1 < q.size(); ++k) {
      const auto [ha, qa] = q[k];
      const auto [hb, qb] = q[k + 1];
      rich.push_back((ha * qb - hb * qa) / (ha - hb));
    }
    const std::size_t from = rich.size() >= 2 ? rich.size() - 2 : 0;
    tail.insert(tail.end(), rich.begin() + from, rich.end());
  }
  if (tail.empty())
    throw InvalidArgument("no admissible side for a difference quotient at t=" + std::to_string(t));
  return side == DerivativeSide::lower ? *std::min_element(tail.begin(), tail.end())
                                       : *std::max_element(tail.begin(), tail.end());
}

}  // namespace detail

// Time derivative of d_t(i, j)^2 in the space's own time parameter.
inline double d2_time_derivative(const Space& space, double t, std::size_t i, std::size_t j,
                                 DerivativeSide side,
                                 const std::vector<double>& steps = default_time_steps()) {
  require_time(space, t, "d2_time_derivative");
  if (space.is_static()) return 0.0;
  const bool analytic = dynamic_cast<const ModelSpace*>(&space) != nullptr;
  if (side == DerivativeSide::exact || analytic) {
    if (auto v = space.exact_d2_rate(t, i, j)) return *v;
    throw UnsupportedOracle("d2_time_derivative: no exact derivative oracle for this space");
  }
  auto g = [&](double s) {
    const double d = space.distance(s, i, j);
    return d * d;
  };
  return detail::dini_derivative(g, t, space.interval(), side, steps);
}

inline double d2_time_derivative(const ModelSpace& space, double t, const Point& x, const Point& y,
                                 DerivativeSide = DerivativeSide::exact) {
  require_time(space, t, "d2_time_derivative");
  return space.d2_rate(t, x, y);
}

inline double scalar_curvature(const Space& space, double t, std::size_t i) {
  require_time(space, t, "scalar_curvature");
  if (dynamic_cast<const ModelSpace*>(&space) == nullptr)
    throw UnsupportedOracle("scalar_curvature: sampled spaces carry no curvature oracle");
  return *space.exact_scalar_curvature(t, i);
}

inline double scalar_curvature(const ModelSpace& space, double t, const Point&) {
  require_time(space, t, "scalar_curvature");
  return space.scalar_curvature(t);
}

struct MetricAudit {
  std::size_t triples = 0;
  double max_asymmetry = 0.0;
  double max_triangle_excess = 0.0;  // max of d(x,z) - d(x,y) - d(y,z), clipped at 0
  double min_weight = 0.0;
  bool ok(double tol = 1e-9) const {
    return max_asymmetry <= tol && max_triangle_excess <= tol && min_weight >= 0.0;
  }
};

// Random triple audit of the metric axioms on one slice.
inline MetricAudit audit_metric(const Space& space, double t, std::size_t triples, std::uint64_t seed) {
  MetricAudit a;
  const std::size_t n = space.size();
  const Eigen::MatrixXd d = space.distance_matrix(t);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const double scale = std::max(1.0, d.maxCoeff());
  for (std::size_t k = 0; k < triples; ++k) {
    const std::size_t x = pick(rng), y = pick(rng), z = pick(rng);
    a.max_asymmetry = std::max(a.max_asymmetry, std::abs(d(x, y) - d(y, x)) / scale);
    a.max_triangle_excess = std::max(a.max_triangle_excess, (d(x, z) - d(x, y) - d(y, z)) / scale);
  }
  a.triples = triples;
  a.min_weight = space.weights(t).minCoeff();
  return a;
}

}  // namespace weakflow
