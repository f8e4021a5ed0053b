#pragma once

#include <nlohmann/json.hpp>

#include <random>
#include <string>
#include <vector>

#include "weakflow/model_space.hpp"
#include "weakflow/sampled_space.hpp"

namespace weakflow {

// A scalar field on a model, stored as a sum of Laplacian eigenfunctions so
// that exact heat decay is available as a reference. Torus coordinates are
// fractions of the side; sphere points are unit vectors.
struct FieldTerm {
  double eigenvalue = 0.0;  // of -Laplacian at scale2 = 1
  PointFunction f;
};

class FieldSpec {
 public:
  FieldSpec() = default;
  FieldSpec(std::string label, std::vector<FieldTerm> terms, bool positive)
      : label_(std::move(label)), terms_(std::move(terms)), positive_(positive) {}

  const std::string& label() const { return label_; }
  const std::vector<FieldTerm>& terms() const { return terms_; }
  bool known_positive() const { return positive_; }
  bool is_constant() const {
    for (const auto& t : terms_)
      if (t.eigenvalue != 0.0) return false;
    return true;
  }

  double operator()(const Point& x) const {
    double s = 0.0;
    for (const auto& t : terms_) s += t.f(x);
    return s;
  }

  PointFunction function() const {
    return [self = *this](const Point& x) { return self(x); };
  }

  // Value after heat flow where each mode decays by exp(-lambda * integral).
  double decayed(const Point& x, double integral_inv_scale2) const {
    double s = 0.0;
    for (const auto& t : terms_) s += std::exp(-t.eigenvalue * integral_inv_scale2) * t.f(x);
    return s;
  }

 private:
  std::string label_;
  std::vector<FieldTerm> terms_;
  bool positive_ = false;
};

// Point coordinates of every node of a node or sampled space.
inline std::vector<Point> space_points(const Space& space) {
  std::vector<Point> pts;
  if (const auto* m = dynamic_cast<const ModelSpace*>(&space)) {
    if (!m->has_nodes()) throw InvalidArgument("analytic space has no nodes to evaluate a field on");
    for (std::size_t i = 0; i < m->size(); ++i) pts.push_back(m->node(i));
  } else if (const auto* s = dynamic_cast<const SampledSpace*>(&space)) {
    if (!s->has_points()) throw InvalidArgument("sampled space carries no point coordinates");
    for (std::size_t i = 0; i < s->size(); ++i) pts.push_back(s->point(i));
  } else {
    throw InvalidArgument("unsupported space type");
  }
  return pts;
}

inline ScalarField evaluate(const FieldSpec& field, const Space& space, double t) {
  const auto pts = space_points(space);
  Eigen::VectorXd v(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) v[i] = field(pts[i]);
  return make_field(space, t, std::move(v));
}

// Exact heat solution on the nodes: each mode decays by exp(-lambda * int_s1^s2 dt / scale2).
inline ScalarField exact_heat(const FieldSpec& field, const ModelSpace& model, const Space& space, double s1,
                              double s2) {
  const double integral = integrate([&](double t) { return 1.0 / model.scale2(t); }, s1, s2, 64);
  const auto pts = space_points(space);
  Eigen::VectorXd v(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) v[i] = field.decayed(pts[i], integral);
  return make_field(space, s2, std::move(v));
}

// Conjugate-heat solution of a constant initial value on a homogeneous model:
// u(tau) = c * exp(-int scal).
inline double exact_conjugate_constant(double c, const ModelSpace& model, double tau1, double tau2) {
  return c * std::exp(-integrate([&](double t) { return model.scalar_curvature(t); }, tau1, tau2, 64));
}

namespace detail {

inline std::vector<double> vec(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw InvalidArgument(where + ": expected an array of numbers");
  std::vector<double> v;
  for (const auto& x : j) {
    if (!x.is_number()) throw InvalidArgument(where + ": expected an array of numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

inline void only_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + ": expected an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) throw InvalidArgument(where + "." + k + ": unknown key");
  }
}

inline double number(const nlohmann::json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw InvalidArgument(where + "." + key + ": expected a number");
  return j.at(key).get<double>();
}

inline FieldTerm torus_mode(const ModelSpace& m, std::vector<int> k, double a, double b) {
  double k2 = 0.0;
  for (int x : k) k2 += double(x) * x;
  const double side = m.length(m.interval().lo) / std::sqrt(m.scale2(m.interval().lo));
  const double lambda = 4.0 * std::numbers::pi * std::numbers::pi * k2 / (side * side);
  return {lambda, [k = std::move(k), a, b](const Point& x) {
            double phase = 0.0;
            for (std::size_t d = 0; d < k.size(); ++d) phase += k[d] * x[d];
            phase *= 2.0 * std::numbers::pi;
            return a * std::cos(phase) + b * std::sin(phase);
          }};
}

inline double sphere_radius0(const ModelSpace& m) { return m.length(m.interval().lo) / std::sqrt(m.scale2(m.interval().lo)); }

// Linear plus quadratic part on the unit sphere: c.x + x^T B x / 2 with B symmetric.
inline std::vector<FieldTerm> sphere_quadratic(const ModelSpace& m, double constant, Eigen::VectorXd c,
                                               Eigen::MatrixXd b) {
  const int n = m.dimension();
  const double r2 = sphere_radius0(m) * sphere_radius0(m);
  const double tr = b.trace() / (n + 1);
  b -= tr * Eigen::MatrixXd::Identity(b.rows(), b.cols());
  std::vector<FieldTerm> out;
  const double c0 = constant + 0.5 * tr;
  out.push_back({0.0, [c0](const Point&) { return c0; }});
  if (c.norm() > 0.0) out.push_back({double(n) / r2, [c](const Point& x) { return c.dot(x); }});
  if (b.norm() > 0.0)
    out.push_back({2.0 * (n + 1) / r2, [b](const Point& x) { return 0.5 * x.dot(b * x); }});
  return out;
}

}  // namespace detail

// Builds a field from its JSON description. `seed` drives random-smooth fields.
inline FieldSpec parse_field(const nlohmann::json& j, const ModelSpace& model, std::uint64_t seed,
                             const std::string& where = "field") {
  if (j.is_number()) {
    const double c = j.get<double>();
    return FieldSpec("constant", {{0.0, [c](const Point&) { return c; }}}, c > 0.0);
  }
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw InvalidArgument(where + ".kind: required string");
  const std::string kind = j.at("kind");
  const bool sphere = model.is_sphere();
  const int n = model.dimension();
  if (kind == "constant") {
    detail::only_keys(j, {"kind", "value"}, where);
    const double c = detail::number(j, "value", 1.0, where);
    return FieldSpec("constant", {{0.0, [c](const Point&) { return c; }}}, c > 0.0);
  }
  if (kind == "cosine") {
    detail::only_keys(j, {"kind", "axis", "frequency", "amplitude"}, where);
    if (sphere) throw InvalidArgument(where + ": cosine fields need a torus");
    const int axis = static_cast<int>(detail::number(j, "axis", 0, where));
    if (axis < 0 || axis >= n) throw InvalidArgument(where + ".axis: out of range");
    std::vector<int> k(n, 0);
    k[axis] = static_cast<int>(detail::number(j, "frequency", 1, where));
    return FieldSpec("cosine", {detail::torus_mode(model, k, detail::number(j, "amplitude", 1.0, where), 0.0)}, false);
  }
  if (kind == "fourier") {
    detail::only_keys(j, {"kind", "terms"}, where);
    if (sphere) throw InvalidArgument(where + ": fourier fields need a torus");
    if (!j.contains("terms") || !j.at("terms").is_array() || j.at("terms").empty())
      throw InvalidArgument(where + ".terms: required nonempty array");
    std::vector<FieldTerm> terms;
    for (std::size_t q = 0; q < j.at("terms").size(); ++q) {
      const auto& t = j.at("terms")[q];
      const std::string w = where + ".terms[" + std::to_string(q) + "]";
      detail::only_keys(t, {"k", "cos", "sin"}, w);
      const auto kd = detail::vec(t.at("k"), w + ".k");
      if (int(kd.size()) != n) throw InvalidArgument(w + ".k: needs " + std::to_string(n) + " entries");
      std::vector<int> k;
      for (double x : kd) k.push_back(static_cast<int>(x));
      terms.push_back(detail::torus_mode(model, k, detail::number(t, "cos", 0.0, w), detail::number(t, "sin", 0.0, w)));
    }
    return FieldSpec("fourier", std::move(terms), false);
  }
  if (kind == "harmonic") {
    detail::only_keys(j, {"kind", "constant", "linear", "quadratic"}, where);
    if (!sphere) throw InvalidArgument(where + ": harmonic fields need a sphere");
    const int amb = n + 1;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(amb);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(amb, amb);
    if (j.contains("linear")) {
      const auto v = detail::vec(j.at("linear"), where + ".linear");
      if (int(v.size()) != amb) throw InvalidArgument(where + ".linear: needs " + std::to_string(amb) + " entries");
      c = Eigen::Map<const Eigen::VectorXd>(v.data(), amb);
    }
    if (j.contains("quadratic")) {
      const auto& rows = j.at("quadratic");
      if (!rows.is_array() || int(rows.size()) != amb)
        throw InvalidArgument(where + ".quadratic: needs a " + std::to_string(amb) + "x" + std::to_string(amb) + " matrix");
      for (int r = 0; r < amb; ++r) {
        const auto v = detail::vec(rows[r], where + ".quadratic");
        if (int(v.size()) != amb) throw InvalidArgument(where + ".quadratic: ragged matrix");
        for (int q = 0; q < amb; ++q) b(r, q) = v[q];
      }
      if ((b - b.transpose()).norm() > 1e-12) throw InvalidArgument(where + ".quadratic: must be symmetric");
    }
    return FieldSpec("harmonic", detail::sphere_quadratic(model, detail::number(j, "constant", 0.0, where), c, b),
                     false);
  }
  if (kind == "bump") {
    detail::only_keys(j, {"kind", "center", "offset"}, where);
    if (!sphere) throw InvalidArgument(where + ": bump fields need a sphere");
    const auto cv = detail::vec(j.at("center"), where + ".center");
    if (int(cv.size()) != n + 1) throw InvalidArgument(where + ".center: needs " + std::to_string(n + 1) + " entries");
    Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(cv.data(), n + 1);
    if (!(c.norm() > 0.0)) throw InvalidArgument(where + ".center: must be nonzero");
    c.normalize();
    const double off = detail::number(j, "offset", 0.05, where);
    if (off < 0.0) throw InvalidArgument(where + ".offset: must be >= 0");
    // (1 + z)^2 / 4 + offset with z = c.x
    return FieldSpec("bump", detail::sphere_quadratic(model, 0.25 + off, 0.5 * c, 0.5 * c * c.transpose()),
                     off > 0.0);
  }
  if (kind == "random-smooth") {
    detail::only_keys(j, {"kind", "seed_offset"}, where);
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(detail::number(j, "seed_offset", 0, where)));
    std::normal_distribution<double> g;
    if (sphere) {
      const int amb = n + 1;
      Eigen::VectorXd c(amb);
      for (int d = 0; d < amb; ++d) c[d] = g(rng);
      Eigen::MatrixXd b(amb, amb);
      for (int r = 0; r < amb; ++r)
        for (int q = 0; q < amb; ++q) b(r, q) = g(rng);
      b = (0.5 * (b + b.transpose())).eval();
      return FieldSpec("random-smooth", detail::sphere_quadratic(model, 0.0, c, b), false);
    }
    std::vector<FieldTerm> terms;
    std::vector<int> k(n, 0);
    // all modes with |k|_inf <= 1, up to sign
    std::function<void(int)> rec = [&](int d) {
      if (d == n) {
        int first = 0;
        for (int x : k)
          if (x != 0) {
            first = x;
            break;
          }
        if (first > 0) terms.push_back(detail::torus_mode(model, k, 0.5 * g(rng), 0.5 * g(rng)));
        return;
      }
      for (int v = -1; v <= 1; ++v) {
        k[d] = v;
        rec(d + 1);
      }
    };
    rec(0);
    return FieldSpec("random-smooth", std::move(terms), false);
  }
  throw InvalidArgument(where + ".kind: unknown field kind '" + kind +
                        "' (expected constant, cosine, fourier, harmonic, bump or random-smooth)");
}

}  // namespace weakflow
