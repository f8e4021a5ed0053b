#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "weakflow/space.hpp"

namespace weakflow {

// Sphere points are unit vectors in R^{n+1}; torus points are fractional
// coordinates in [0, 1)^n.
using Point = Eigen::VectorXd;
using PointFunction = std::function<double(const Point&)>;

class FlowLaw {
 public:
  enum class Kind { stationary, ricci_backward, custom_scale };

  static FlowLaw stationary() { return FlowLaw(Kind::stationary, "static"); }
  static FlowLaw ricci_backward() { return FlowLaw(Kind::ricci_backward, "ricci-backward"); }

  // Distances scale by phi(t); dphi may be empty, then a central difference is used.
  static FlowLaw custom_scale(std::function<double(double)> phi, std::function<double(double)> dphi,
                              std::string label) {
    if (!phi) throw InvalidArgument("custom scale needs a scale function");
    FlowLaw law(Kind::custom_scale, std::move(label));
    law.phi_ = std::move(phi);
    law.dphi_ = std::move(dphi);
    return law;
  }

  static FlowLaw exponential_scale(double rate) {
    auto law = custom_scale([rate](double t) { return std::exp(rate * t); },
                            [rate](double t) { return rate * std::exp(rate * t); },
                            "exponential(" + std::to_string(rate) + ")");
    law.rate_ = rate;
    return law;
  }

  static FlowLaw linear_scale(double rate) {
    auto law = custom_scale([rate](double t) { return 1.0 + rate * t; },
                            [rate](double) { return rate; }, "linear(" + std::to_string(rate) + ")");
    law.rate_ = rate;
    return law;
  }

  Kind kind() const { return kind_; }
  const std::string& label() const { return label_; }
  std::optional<double> rate() const { return rate_; }

  double phi(double t) const { return phi_(t); }
  double dphi(double t) const {
    if (dphi_) return dphi_(t);
    const double h = 1e-6 * std::max(1.0, std::abs(t));
    return (phi_(t + h) - phi_(t - h)) / (2.0 * h);
  }

 private:
  FlowLaw(Kind k, std::string label) : kind_(k), label_(std::move(label)) {}

  Kind kind_;
  std::string label_;
  std::function<double(double)> phi_;
  std::function<double(double)> dphi_;
  std::optional<double> rate_;
};

enum class ModelKind { round_sphere, flat_torus };

struct ModelOptions {
  TimeInterval interval{0.0, 1.0};
  Orientation orientation = Orientation::backward;
};

enum class NodeLayout { none, periodic_grid, gauss_sphere };

struct QuadraturePoint {
  Point y;
  double w;
};

namespace detail {

// Average of exp(i k.y) over the unit-normalized ball / sphere of radius r in
// R^n, as a function of z = |k| r.
inline double ball_multiplier(int n, double z) {
  if (z < 1e-8) return 1.0 - z * z / (2.0 * (n + 2));
  if (n == 1) return std::sin(z) / z;
  const double nu = 0.5 * n;
  return std::tgamma(nu + 1.0) * std::pow(2.0 / z, nu) * std::cyl_bessel_j(nu, z);
}

inline double sphere_multiplier(int n, double z) {
  if (z < 1e-8) return 1.0 - z * z / (2.0 * n);
  if (n == 1) return std::cos(z);
  if (n == 2) return std::cyl_bessel_j(0.0, z);
  const double nu = 0.5 * n - 1.0;
  return std::tgamma(nu + 1.0) * std::pow(2.0 / z, nu) * std::cyl_bessel_j(nu, z);
}

// Integral of sin^{n-1} over [0, a].
inline double sine_power_integral(int n, double a) {
  switch (n) {
    case 1: return a;
    case 2: return 1.0 - std::cos(a);
    case 3: return 0.5 * (a - std::sin(a) * std::cos(a));
    default: return integrate([n](double s) { return std::pow(std::sin(s), n - 1); }, 0.0, a, 64);
  }
}

// Unit-normalized quadrature on S^{n-1} in R^n.
inline std::vector<std::pair<Eigen::VectorXd, double>> direction_rule(int n) {
  std::vector<std::pair<Eigen::VectorXd, double>> out;
  if (n == 1) {
    out.emplace_back(Eigen::VectorXd::Constant(1, 1.0), 0.5);
    out.emplace_back(Eigen::VectorXd::Constant(1, -1.0), 0.5);
  } else if (n == 2) {
    const int k = 64;
    for (int i = 0; i < k; ++i) {
      const double a = 2.0 * std::numbers::pi * i / k;
      Eigen::VectorXd u(2);
      u << std::cos(a), std::sin(a);
      out.emplace_back(u, 1.0 / k);
    }
  } else if (n == 3) {
    const GaussRule g = gauss_legendre(16);
    const int k = 32;
    for (std::size_t a = 0; a < g.nodes.size(); ++a) {
      const double z = g.nodes[a], s = std::sqrt(1.0 - z * z);
      for (int b = 0; b < k; ++b) {
        const double p = 2.0 * std::numbers::pi * b / k;
        Eigen::VectorXd u(3);
        u << s * std::cos(p), s * std::sin(p), z;
        out.emplace_back(u, 0.5 * g.weights[a] / k);
      }
    }
  } else {
    throw UnsupportedOracle("direction quadrature available for n <= 3 only");
  }
  return out;
}

}  // namespace detail

// Round sphere or flat torus with a closed-form flow law, optionally carrying
// a quadrature node set on which averaging acts by exact zonal multipliers
// applied to the band-limited reconstruction of node values.
class ModelSpace final : public Space {
 public:
  ModelSpace(ModelKind kind, int n, double base_length, FlowLaw law, ModelOptions options = {})
      : kind_(kind), n_(n), base_(base_length), law_(std::move(law)),
        native_interval_(options.interval), native_orientation_(options.orientation) {
    if (n < 1) throw InvalidArgument("dimension must be >= 1");
    if (!(base_length > 0.0) || !std::isfinite(base_length))
      throw InvalidArgument(kind == ModelKind::round_sphere ? "sphere radius must be positive"
                                                            : "torus side must be positive");
    if (!(options.interval.hi >= options.interval.lo))
      throw InvalidArgument("time interval must satisfy lo <= hi");
    for (int k = 0; k <= 64; ++k) {
      const double s = native_interval_.lo + native_interval_.length() * k / 64.0;
      const double v = native_scale2(s);
      if (!(v > 0.0) || !std::isfinite(v)) {
        if (law_.kind() == FlowLaw::Kind::ricci_backward)
          throw InvalidArgument("ricci-backward radius squared is nonpositive at tau=" +
                                std::to_string(s));
        throw InvalidArgument("flow scale factor must be positive on the interval");
      }
    }
  }

  ModelKind kind() const { return kind_; }
  bool is_sphere() const { return kind_ == ModelKind::round_sphere; }
  double base_length() const { return base_; }
  const FlowLaw& flow() const { return law_; }
  int ambient_dimension() const { return is_sphere() ? n_ + 1 : n_; }

  // --- Space interface ---------------------------------------------------

  int dimension() const override { return n_; }

  TimeInterval interval() const override {
    const double a = public_time(native_interval_.lo), b = public_time(native_interval_.hi);
    return {std::min(a, b), std::max(a, b)};
  }

  Orientation orientation() const override {
    return time_sign_ > 0 ? native_orientation_ : flipped(native_orientation_);
  }

  bool is_static() const override {
    switch (law_.kind()) {
      case FlowLaw::Kind::stationary: return true;
      case FlowLaw::Kind::ricci_backward: return !is_sphere() || n_ == 1;
      case FlowLaw::Kind::custom_scale: return false;
    }
    return false;
  }

  std::string label() const override {
    std::string s = is_sphere() ? "sphere" : "torus";
    s += "(n=" + std::to_string(n_) + (is_sphere() ? ", R0=" : ", side=") + std::to_string(base_) +
         ", " + law_.label() + ")";
    return s;
  }

  std::size_t size() const override { return static_cast<std::size_t>(nodes_.rows()); }

  double distance(double t, std::size_t i, std::size_t j) const override {
    return distance(t, Point(nodes_.row(i).transpose()), Point(nodes_.row(j).transpose()));
  }

  Eigen::VectorXd weights(double t) const override { return fractions_ * total_volume(t); }

  double ball_measure(double t, std::size_t, double r) const override { return ball_volume(t, r); }

  double sphere_area(double t, std::size_t, double r) const override { return shell_area(t, r); }

  Eigen::MatrixXd mean_matrix(bool ball, double t, double r) const override {
    require_nodes("mean_matrix");
    if (layout_ == NodeLayout::periodic_grid) return periodic_mean_matrix(ball, t, r);
    return zonal_mean_matrix(ball, t, r);
  }

  std::optional<double> exact_d2_rate(double t, std::size_t i, std::size_t j) const override {
    return d2_rate(t, node(i), node(j));
  }

  std::optional<double> exact_scalar_curvature(double t, std::size_t) const override {
    return scalar_curvature(t);
  }

  std::optional<bool> virtually_psc_hint() const override { return true; }

  std::unique_ptr<Space> reversed(double anchor) const override {
    return std::make_unique<ModelSpace>(reversed_model(anchor));
  }

  ModelSpace reversed_model(double anchor) const {
    ModelSpace out = *this;
    out.time_offset_ = time_offset_ + time_sign_ * anchor;
    out.time_sign_ = -time_sign_;
    out.renew_id();
    return out;
  }

  // --- time map and scale ------------------------------------------------

  double native_time(double t) const { return time_offset_ + time_sign_ * t; }
  double public_time(double s) const { return (s - time_offset_) * time_sign_; }

  // Squared distance scale relative to the base metric.
  double scale2(double t) const { return native_scale2(native_time(t)); }

  // d/dt of scale2 in this space's own time parameter.
  double scale2_rate(double t) const {
    const double s = native_time(t);
    double rate = 0.0;
    switch (law_.kind()) {
      case FlowLaw::Kind::stationary: rate = 0.0; break;
      case FlowLaw::Kind::ricci_backward:
        rate = is_sphere() ? 2.0 * (n_ - 1) / (base_ * base_) : 0.0;
        break;
      case FlowLaw::Kind::custom_scale: rate = 2.0 * law_.phi(s) * law_.dphi(s); break;
    }
    return rate * time_sign_;
  }

  // Sphere radius or torus side at time t.
  double length(double t) const { return base_ * std::sqrt(scale2(t)); }

  // --- closed-form geometry ----------------------------------------------

  double distance(double t, const Point& x, const Point& y) const {
    check_point(x);
    check_point(y);
    if (is_sphere()) {
      const double chord = (x - y).norm();
      return length(t) * 2.0 * std::asin(std::min(1.0, 0.5 * chord));
    }
    double s2 = 0.0;
    for (int d = 0; d < n_; ++d) {
      double delta = x[d] - y[d];
      delta -= std::round(delta);
      s2 += delta * delta;
    }
    return length(t) * std::sqrt(s2);
  }

  double diameter(double t) const {
    return is_sphere() ? std::numbers::pi * length(t) : 0.5 * length(t) * std::sqrt(double(n_));
  }

  double injectivity_radius(double t) const {
    return is_sphere() ? std::numbers::pi * length(t) : 0.5 * length(t);
  }

  double total_volume(double t) const {
    const double l = length(t);
    if (is_sphere()) return unit_sphere_area(n_ + 1) * std::pow(l, n_);
    return std::pow(l, n_);
  }

  double scalar_curvature(double t) const {
    if (!is_sphere()) return 0.0;
    const double r = length(t);
    return n_ * (n_ - 1.0) / (r * r);
  }

  double d2_rate(double t, const Point& x, const Point& y) const {
    const double d = distance(t, x, y);
    return d * d * scale2_rate(t) / scale2(t);
  }

  // Volume of a closed ball of radius r.
  double ball_volume(double t, double r) const {
    if (r < 0.0) throw InvalidArgument("radius must be nonnegative");
    const double l = length(t);
    if (is_sphere()) {
      const double a = std::min(r / l, std::numbers::pi);
      return unit_sphere_area(n_) * std::pow(l, n_) * detail::sine_power_integral(n_, a);
    }
    const double h = 0.5 * l;
    if (r <= h) return unit_ball_volume(n_) * std::pow(r, n_);
    if (n_ == 1) return l;
    if (n_ == 2) {
      const double b = std::sqrt(r * r - h * h);
      if (b >= h) return l * l;
      auto prim = [r](double x) { return 0.5 * (x * std::sqrt(std::max(0.0, r * r - x * x)) + r * r * std::asin(x / r)); };
      return 4.0 * (h * b + prim(h) - prim(b));
    }
    throw UnsupportedOracle("torus ball volume beyond the injectivity radius needs n <= 2");
  }

  // (n-1)-dimensional measure of the sphere of radius r.
  double shell_area(double t, double r) const {
    if (r < 0.0) throw InvalidArgument("radius must be nonnegative");
    const double l = length(t);
    const double tol = 1e-12 * std::max(1.0, r);
    if (is_sphere()) {
      const double a = r / l;
      if (n_ == 1) return a < std::numbers::pi - tol ? 2.0 : (a <= std::numbers::pi + tol ? 1.0 : 0.0);
      if (a >= std::numbers::pi) return 0.0;
      return unit_sphere_area(n_) * std::pow(l * std::sin(a), n_ - 1);
    }
    const double h = 0.5 * l;
    if (n_ == 1) return r < h - tol ? 2.0 : (r <= h + tol ? 1.0 : 0.0);
    if (r <= h) return unit_sphere_area(n_) * std::pow(r, n_ - 1);
    if (n_ == 2) {
      if (h / r < std::sqrt(0.5)) return 0.0;
      return 4.0 * r * (std::asin(h / r) - std::acos(h / r));
    }
    throw UnsupportedOracle("torus sphere area beyond the injectivity radius needs n <= 2");
  }

  // --- points ------------------------------------------------------------

  Point normalize(const Point& x) const {
    if (x.size() != ambient_dimension())
      throw InvalidArgument("point has " + std::to_string(x.size()) + " coordinates, expected " +
                            std::to_string(ambient_dimension()));
    if (is_sphere()) {
      const double norm = x.norm();
      if (!(norm > 0.0)) throw InvalidArgument("sphere point must be nonzero");
      return x / norm;
    }
    Point y = x;
    for (int d = 0; d < n_; ++d) y[d] -= std::floor(y[d]);
    return y;
  }

  Point random_point(std::mt19937_64& rng) const {
    Point x(ambient_dimension());
    if (is_sphere()) {
      std::normal_distribution<double> g;
      do {
        for (int d = 0; d < x.size(); ++d) x[d] = g(rng);
      } while (x.norm() < 1e-12);
      return x / x.norm();
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int d = 0; d < n_; ++d) x[d] = u(rng);
    return x;
  }

  // Point reached from x by moving geodesic distance rho along unit tangent u.
  Point geodesic_point(double t, const Point& x, const Eigen::VectorXd& u, double rho) const {
    if (is_sphere()) {
      const Eigen::MatrixXd frame = tangent_frame(x);
      const double a = rho / length(t);
      return std::cos(a) * x + std::sin(a) * (frame * u);
    }
    Point y = x + (rho / length(t)) * u;
    for (int d = 0; d < n_; ++d) y[d] -= std::floor(y[d]);
    return y;
  }

  // Unit-normalized quadrature for the uniform measure on the sphere S_r(x).
  std::vector<QuadraturePoint> sphere_quadrature(double t, const Point& x, double r) const {
    check_point(x);
    if (r > injectivity_radius(t) * (1.0 + 1e-12))
      throw UnsupportedOracle("sphere quadrature needs r below the injectivity radius");
    std::vector<QuadraturePoint> out;
    for (const auto& [u, w] : detail::direction_rule(n_)) out.push_back({geodesic_point(t, x, u, r), w});
    return out;
  }

  // Unit-normalized quadrature for the measure restricted to the ball B_r(x).
  std::vector<QuadraturePoint> ball_quadrature(double t, const Point& x, double r) const {
    check_point(x);
    double reach = r;
    if (r > injectivity_radius(t)) {
      if (is_sphere() || n_ == 1)
        reach = injectivity_radius(t);
      else
        throw UnsupportedOracle("ball quadrature needs r below the injectivity radius for n >= 2");
    }
    const GaussRule g = gauss_legendre(48);
    const auto dirs = detail::direction_rule(n_);
    std::vector<QuadraturePoint> out;
    double total = 0.0;
    for (std::size_t k = 0; k < g.nodes.size(); ++k) {
      const double rho = 0.5 * reach * (g.nodes[k] + 1.0);
      const double density = shell_area(t, rho) * 0.5 * reach * g.weights[k];
      for (const auto& [u, w] : dirs) {
        out.push_back({geodesic_point(t, x, u, rho), density * w});
        total += density * w;
      }
    }
    for (auto& q : out) q.w /= total;
    return out;
  }

  // --- nodes -------------------------------------------------------------

  bool has_nodes() const { return nodes_.rows() > 0; }
  NodeLayout layout() const { return layout_; }
  Point node(std::size_t i) const { return nodes_.row(i).transpose(); }
  const Eigen::MatrixXd& nodes() const { return nodes_; }
  const Eigen::VectorXd& node_fractions() const { return fractions_; }

  // Largest harmonic degree resolved by a Gauss sphere layout.
  int band_limit() const { return band_; }
  int grid_lat() const { return grid_lat_; }
  int grid_lon() const { return grid_lon_; }
  int grid_side() const { return grid_side_; }

  // Copy with a quadrature node layout: a uniform grid (torus, circle) or a
  // Gauss-Legendre by uniform-longitude product grid (2-sphere).
  ModelSpace with_nodes(std::size_t count) const {
    if (count < 2) throw InvalidArgument("node count must be >= 2");
    ModelSpace out = *this;
    out.renew_id();
    if (!is_sphere() || n_ == 1) {
      const int dims = n_;
      const int side = static_cast<int>(std::llround(std::pow(double(count), 1.0 / dims)));
      std::size_t total = 1;
      for (int d = 0; d < dims; ++d) total *= side;
      if (total != count)
        throw InvalidArgument("grid layout needs a perfect " + std::to_string(dims) +
                              "-th power node count, got " + std::to_string(count));
      out.layout_ = NodeLayout::periodic_grid;
      out.grid_side_ = side;
      out.nodes_.resize(count, ambient_dimension());
      for (std::size_t i = 0; i < count; ++i) {
        std::size_t rest = i;
        if (is_sphere()) {
          const double a = 2.0 * std::numbers::pi * double(i) / count;
          out.nodes_(i, 0) = std::cos(a);
          out.nodes_(i, 1) = std::sin(a);
        } else {
          for (int d = 0; d < dims; ++d) {
            out.nodes_(i, d) = double(rest % side) / side;
            rest /= side;
          }
        }
      }
      out.fractions_ = Eigen::VectorXd::Constant(count, 1.0 / count);
      return out;
    }
    if (n_ != 2) throw UnsupportedOracle("node layouts on spheres need n <= 2");
    int lat = 0;
    for (int a = 1; std::size_t(a) * a <= count; ++a)
      if (count % a == 0 && count / a >= std::size_t(2 * a - 1)) lat = a;
    if (lat < 2)
      throw InvalidArgument("Gauss sphere layout needs N = n_lat * n_lon with n_lon >= 2 n_lat - 1");
    const int lon = static_cast<int>(count / lat);
    const GaussRule g = gauss_legendre(lat);
    out.layout_ = NodeLayout::gauss_sphere;
    out.grid_lat_ = lat;
    out.grid_lon_ = lon;
    out.band_ = lat - 1;
    out.nodes_.resize(count, 3);
    out.fractions_.resize(count);
    for (int a = 0; a < lat; ++a) {
      const double z = g.nodes[a], s = std::sqrt(1.0 - z * z);
      for (int b = 0; b < lon; ++b) {
        const double p = 2.0 * std::numbers::pi * (b + 0.5) / lon;
        const std::size_t i = std::size_t(a) * lon + b;
        out.nodes_(i, 0) = s * std::cos(p);
        out.nodes_(i, 1) = s * std::sin(p);
        out.nodes_(i, 2) = z;
        out.fractions_[i] = 0.5 * g.weights[a] / lon;
      }
    }
    return out;
  }

 private:
  double native_scale2(double s) const {
    switch (law_.kind()) {
      case FlowLaw::Kind::stationary: return 1.0;
      case FlowLaw::Kind::ricci_backward:
        return is_sphere() ? 1.0 + 2.0 * (n_ - 1) * s / (base_ * base_) : 1.0;
      case FlowLaw::Kind::custom_scale: {
        const double p = law_.phi(s);
        return p > 0.0 ? p * p : -1.0;
      }
    }
    return 1.0;
  }

  void check_point(const Point& x) const {
    if (x.size() != ambient_dimension())
      throw InvalidArgument("point has " + std::to_string(x.size()) + " coordinates, expected " +
                            std::to_string(ambient_dimension()));
  }

  void require_nodes(const char* who) const {
    if (!has_nodes())
      throw InvalidArgument(std::string(who) + ": model space has no node layout (use with_nodes)");
  }

  Eigen::MatrixXd tangent_frame(const Point& x) const {
    const int m = ambient_dimension();
    Eigen::MatrixXd frame(m, n_);
    int filled = 0;
    for (int k = 0; k < m && filled < n_; ++k) {
      Eigen::VectorXd v = Eigen::VectorXd::Unit(m, k);
      v -= v.dot(x) * x;
      for (int c = 0; c < filled; ++c) v -= v.dot(frame.col(c)) * frame.col(c);
      if (v.norm() > 1e-6) frame.col(filled++) = v / v.norm();
    }
    return frame;
  }

  // Uniform grid on a periodic domain: circulant matrix with Fourier multipliers.
  Eigen::MatrixXd periodic_mean_matrix(bool ball, double t, double r) const {
    const int dims = n_;
    const int side = grid_side_;
    const std::size_t count = size();
    const double period = is_sphere() ? 2.0 * std::numbers::pi * length(t) : length(t);
    const double half = 0.5 * period;
    const double tol = 1e-12 * std::max(1.0, r);
    if (r > half + tol) {
      if (dims != 1)
        throw UnsupportedOracle("band-limited averaging beyond the injectivity radius needs n = 1");
      if (!ball) throw DegenerateSupport(0, "sphere of radius " + std::to_string(r) + " is empty");
      return Eigen::MatrixXd::Constant(count, count, 1.0 / count);
    }
    std::vector<int> modes(side);
    for (int k = 0; k < side; ++k) modes[k] = k <= side / 2 ? k : k - side;
    // cos table per (mode, offset) in one dimension
    Eigen::MatrixXd cosine(side, side);
    for (int a = 0; a < side; ++a)
      for (int b = 0; b < side; ++b) cosine(a, b) = std::cos(2.0 * std::numbers::pi * modes[a] * b / side);
    std::vector<double> mult(count);
    for (std::size_t m = 0; m < count; ++m) {
      std::size_t rest = m;
      double k2 = 0.0;
      for (int d = 0; d < dims; ++d) {
        const double k = 2.0 * std::numbers::pi * modes[rest % side] / period;
        k2 += k * k;
        rest /= side;
      }
      const double z = std::sqrt(k2) * r;
      mult[m] = ball ? detail::ball_multiplier(dims, z) : detail::sphere_multiplier(dims, z);
    }
    std::vector<double> kernel(count, 0.0);
    parallel_for(count, [&](std::size_t off) {
      double sum = 0.0;
      for (std::size_t m = 0; m < count; ++m) {
        std::size_t rm = m, ro = off;
        double prod = mult[m];
        for (int d = 0; d < dims; ++d) {
          prod *= cosine(rm % side, ro % side);
          rm /= side;
          ro /= side;
        }
        sum += prod;
      }
      kernel[off] = sum / count;
    });
    Eigen::MatrixXd out(count, count);
    parallel_for(count, [&](std::size_t i) {
      for (std::size_t j = 0; j < count; ++j) {
        std::size_t ri = i, rj = j, off = 0, stride = 1;
        for (int d = 0; d < dims; ++d) {
          const int a = int(ri % side), b = int(rj % side);
          off += std::size_t(((a - b) % side + side) % side) * stride;
          stride *= side;
          ri /= side;
          rj /= side;
        }
        out(i, j) = kernel[off];
      }
    });
    return out;
  }

  // Gauss product grid on the 2-sphere: addition-theorem zonal matrix.
  Eigen::MatrixXd zonal_mean_matrix(bool ball, double t, double r) const {
    const std::size_t count = size();
    const int lmax = band_;
    const double a = r / length(t);
    const double tol = 1e-12 * std::max(1.0, a);
    std::vector<double> lambda(lmax + 2, 0.0);
    if (a >= std::numbers::pi - tol) {
      if (ball) {
        lambda[0] = 1.0;
      } else if (a <= std::numbers::pi + tol) {
        for (int l = 0; l <= lmax; ++l) lambda[l] = (l % 2 == 0) ? 1.0 : -1.0;
      } else {
        throw DegenerateSupport(0, "sphere of radius " + std::to_string(r) + " is empty");
      }
    } else {
      const double c = std::cos(a);
      std::vector<double> p(lmax + 2);
      legendre_table(lmax + 1, c, p.data());
      if (ball) {
        const double one_minus_c = 2.0 * std::sin(0.5 * a) * std::sin(0.5 * a);
        lambda[0] = 1.0;
        for (int l = 1; l <= lmax; ++l) lambda[l] = (p[l - 1] - p[l + 1]) / ((2.0 * l + 1.0) * one_minus_c);
      } else {
        for (int l = 0; l <= lmax; ++l) lambda[l] = p[l];
      }
    }
    std::vector<double> coef(lmax + 1);
    for (int l = 0; l <= lmax; ++l) coef[l] = lambda[l] * (2.0 * l + 1.0);
    // the 4 pi in the addition theorem cancels the unit-sphere weights 4 pi * fraction
    Eigen::MatrixXd sym(count, count);
    parallel_for(count, [&](std::size_t i) {
      std::vector<double> p(lmax + 1);
      for (std::size_t j = 0; j < count; ++j) {
        const double x = std::clamp(nodes_.row(i).dot(nodes_.row(j)), -1.0, 1.0);
        legendre_table(lmax, x, p.data());
        double s = 0.0;
        for (int l = 0; l <= lmax; ++l) s += coef[l] * p[l];
        sym(i, j) = s;
      }
    });
    Eigen::MatrixXd out = sym * fractions_.asDiagonal();
    return out;
  }

  ModelKind kind_;
  int n_;
  double base_;
  FlowLaw law_;
  TimeInterval native_interval_;
  Orientation native_orientation_;
  double time_offset_ = 0.0;
  double time_sign_ = 1.0;

  NodeLayout layout_ = NodeLayout::none;
  Eigen::MatrixXd nodes_;
  Eigen::VectorXd fractions_;
  int band_ = 0;
  int grid_lat_ = 0;
  int grid_lon_ = 0;
  int grid_side_ = 0;
};

inline ModelSpace make_round_sphere(int n, double R0, FlowLaw flow, ModelOptions options = {}) {
  return ModelSpace(ModelKind::round_sphere, n, R0, std::move(flow), options);
}

inline ModelSpace make_flat_torus(int n, double side, FlowLaw flow, ModelOptions options = {}) {
  return ModelSpace(ModelKind::flat_torus, n, side, std::move(flow), options);
}

inline ModelSpace time_reversed(const ModelSpace& space, double anchor) {
  return space.reversed_model(anchor);
}

}  // namespace weakflow
