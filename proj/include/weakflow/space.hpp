#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "weakflow/core.hpp"

namespace weakflow {

enum class OperatorKind { sigma, nu, theta, eta, alpha, beta };

inline const char* to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::sigma: return "sigma";
    case OperatorKind::nu: return "nu";
    case OperatorKind::theta: return "theta";
    case OperatorKind::eta: return "eta";
    case OperatorKind::alpha: return "alpha";
    case OperatorKind::beta: return "beta";
  }
  return "?";
}

inline OperatorKind parse_operator_kind(std::string_view s) {
  for (auto k : {OperatorKind::sigma, OperatorKind::nu, OperatorKind::theta, OperatorKind::eta,
                 OperatorKind::alpha, OperatorKind::beta})
    if (s == to_string(k)) return k;
  throw InvalidArgument("unknown operator kind '" + std::string(s) + "'");
}

// Ball-based kinds average over B_r; the others live on the sphere of radius r.
inline bool is_ball_kind(OperatorKind k) {
  return k == OperatorKind::nu || k == OperatorKind::eta || k == OperatorKind::beta;
}

enum class DerivativeSide { upper, lower, exact };

inline const char* to_string(DerivativeSide s) {
  switch (s) {
    case DerivativeSide::upper: return "upper";
    case DerivativeSide::lower: return "lower";
    case DerivativeSide::exact: return "exact";
  }
  return "?";
}

inline DerivativeSide parse_derivative_side(std::string_view s) {
  if (s == "upper") return DerivativeSide::upper;
  if (s == "lower") return DerivativeSide::lower;
  if (s == "exact") return DerivativeSide::exact;
  throw InvalidArgument("unknown derivative side '" + std::string(s) + "'");
}

// Node values of a function on one time slice of one space.
struct ScalarField {
  Eigen::VectorXd values;
  double time = 0.0;
  std::uint64_t space_id = 0;
};

// A time-dependent metric-measure space carried by a finite node set.
//
// Time t is the space's own parameter: forward time for forward-oriented
// spaces, backward time tau for backward-oriented ones.
class Space {
 public:
  virtual ~Space() = default;

  std::uint64_t id() const { return id_; }

  virtual int dimension() const = 0;
  virtual TimeInterval interval() const = 0;
  virtual Orientation orientation() const = 0;
  virtual bool is_static() const = 0;
  virtual bool pseudo_metric() const { return false; }
  virtual bool closed() const { return true; }
  virtual std::string label() const = 0;

  virtual std::size_t size() const = 0;
  virtual double distance(double t, std::size_t i, std::size_t j) const = 0;
  virtual Eigen::VectorXd weights(double t) const = 0;

  virtual Eigen::MatrixXd distance_matrix(double t) const {
    const std::size_t n = size();
    Eigen::MatrixXd d(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      d(i, i) = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) d(i, j) = d(j, i) = distance(t, i, j);
    }
    return d;
  }

  double total_mass(double t) const { return weights(t).sum(); }

  // Measure of the closed ball B_r(node i).
  virtual double ball_measure(double t, std::size_t i, double r) const = 0;

  // Area of the sphere of radius r around node i: exact on model spaces,
  // shell weight / (2 delta) on sampled ones.
  virtual double sphere_area(double t, std::size_t i, double r) const = 0;

  // Row-stochastic averaging matrix: ball (nu) or sphere (sigma), radius r > 0.
  virtual Eigen::MatrixXd mean_matrix(bool ball, double t, double r) const = 0;

  // Exact d/dt of d_t(i, j)^2, when an oracle exists.
  virtual std::optional<double> exact_d2_rate(double, std::size_t, std::size_t) const {
    return std::nullopt;
  }

  // Exact scalar curvature at a node, when an oracle exists.
  virtual std::optional<double> exact_scalar_curvature(double, std::size_t) const {
    return std::nullopt;
  }

  // Known virtually-psc status, if the space carries one.
  virtual std::optional<bool> virtually_psc_hint() const { return std::nullopt; }

  // Same space parametrized by anchor - t with flipped orientation.
  virtual std::unique_ptr<Space> reversed(double anchor) const = 0;

  bool has_time(double t) const { return interval().contains(t); }

 protected:
  Space() : id_(next_id()) {}
  Space(const Space&) = default;
  Space& operator=(const Space&) = default;

  void renew_id() { id_ = next_id(); }

 private:
  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter++;
  }
  std::uint64_t id_;
};

inline ScalarField make_field(const Space& space, double t, Eigen::VectorXd values) {
  if (static_cast<std::size_t>(values.size()) != space.size())
    throw InvalidArgument("field size " + std::to_string(values.size()) + " does not match " +
                          std::to_string(space.size()) + " nodes");
  if (!space.has_time(t)) throw InvalidArgument("field time outside the space interval");
  if (!values.allFinite()) throw InvalidArgument("field values must be finite");
  return ScalarField{std::move(values), t, space.id()};
}

inline ScalarField constant_field(const Space& space, double t, double c) {
  return make_field(space, t, Eigen::VectorXd::Constant(space.size(), c));
}

inline void require_field(const Space& space, const ScalarField& f, double t, const char* who) {
  if (f.space_id != space.id())
    throw InvalidArgument(std::string(who) + ": field belongs to a different space");
  if (!same_time(f.time, t))
    throw InvalidArgument(std::string(who) + ": field tagged at t=" + std::to_string(f.time) +
                          ", expected t=" + std::to_string(t));
  if (static_cast<std::size_t>(f.values.size()) != space.size())
    throw InvalidArgument(std::string(who) + ": field size mismatch");
}

inline void require_time(const Space& space, double t, const char* who) {
  if (!space.has_time(t))
    throw InvalidArgument(std::string(who) + ": time " + std::to_string(t) +
                          " outside the space interval");
}

}  // namespace weakflow
