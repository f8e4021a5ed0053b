#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace weakflow {

inline constexpr const char* version = "0.3.0";

// Error hierarchy. Every failure raised by the library derives from Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DegenerateSupport : public Error {
 public:
  DegenerateSupport(std::size_t point, const std::string& what)
      : Error("degenerate support at point " + std::to_string(point) + ": " + what),
        point_(point) {}
  std::size_t point() const { return point_; }

 private:
  std::size_t point_;
};

class UnsupportedOracle : public Error {
 public:
  using Error::Error;
};

class UnstableFit : public Error {
 public:
  using Error::Error;
};

class InfeasibleMarginals : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

class NegativeDensity : public Error {
 public:
  using Error::Error;
};

enum class Orientation { forward, backward };

inline const char* to_string(Orientation o) {
  return o == Orientation::forward ? "forward" : "backward";
}

inline Orientation flipped(Orientation o) {
  return o == Orientation::forward ? Orientation::backward : Orientation::forward;
}

struct TimeInterval {
  double lo = 0.0;
  double hi = 1.0;

  double tolerance() const { return 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)}); }
  bool contains(double t) const { return t >= lo - tolerance() && t <= hi + tolerance(); }
  double length() const { return hi - lo; }
};

inline bool same_time(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

// Volume of the Euclidean unit ball in R^n.
inline double unit_ball_volume(int n) {
  return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

// Area of the unit sphere S^{n-1} in R^n, n * omega_n.
inline double unit_sphere_area(int n) { return n * unit_ball_volume(n); }

// ---------------------------------------------------------------------------
// warnings

using WarningHandler = std::function<void(const std::string&)>;

namespace detail {
inline std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}
inline WarningHandler& warning_slot() {
  static WarningHandler h = [](const std::string& msg) {
    std::clog << "weakflow: warning: " << msg << '\n';
  };
  return h;
}
}  // namespace detail

inline WarningHandler set_warning_handler(WarningHandler h) {
  std::lock_guard lock(detail::warning_mutex());
  return std::exchange(detail::warning_slot(), std::move(h));
}

inline void warn(const std::string& msg) {
  std::lock_guard lock(detail::warning_mutex());
  if (detail::warning_slot()) detail::warning_slot()(msg);
}

// Collects warnings for its lifetime instead of printing them.
class WarningCapture {
 public:
  WarningCapture()
      : previous_(set_warning_handler([this](const std::string& m) { messages_.push_back(m); })) {}
  ~WarningCapture() { set_warning_handler(std::move(previous_)); }
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
  WarningHandler previous_;
};

// ---------------------------------------------------------------------------
// bounded worker pool for embarrassingly parallel loops

namespace detail {
inline std::atomic<unsigned>& job_limit() {
  static std::atomic<unsigned> v{std::max(1u, std::thread::hardware_concurrency())};
  return v;
}
}  // namespace detail

inline void set_max_jobs(unsigned k) { detail::job_limit() = std::max(1u, k); }
inline unsigned max_jobs() { return detail::job_limit(); }

// Runs fn(i) for i in [0, n). Each index is written by exactly one worker, so
// results do not depend on the worker count.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  const std::size_t workers = std::min<std::size_t>(max_jobs(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t end = std::min(n, (w + 1) * chunk);
        for (std::size_t i = w * chunk; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// quadrature

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre rule on [-1, 1], nodes ascending.
inline GaussRule gauss_legendre(int count) {
  if (count < 1) throw InvalidArgument("gauss_legendre: count must be positive");
  GaussRule rule;
  rule.nodes.resize(count);
  rule.weights.resize(count);
  for (int i = 0; i < (count + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (count + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= count; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = count * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= count; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = count * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[count - 1 - i] = x;
    rule.nodes[i] = -x;
    rule.weights[i] = rule.weights[count - 1 - i] = w;
  }
  if (count % 2 == 1) rule.nodes[count / 2] = 0.0;
  return rule;
}

// Integral of fn over [a, b] with a fixed Gauss-Legendre rule.
template <class F>
double integrate(F&& fn, double a, double b, int count = 48) {
  static thread_local std::vector<GaussRule> cache;
  if (static_cast<int>(cache.size()) <= count) cache.resize(count + 1);
  if (cache[count].nodes.empty()) cache[count] = gauss_legendre(count);
  const GaussRule& g = cache[count];
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < count; ++i) sum += g.weights[i] * fn(mid + half * g.nodes[i]);
  return sum * half;
}

// Legendre polynomials P_0..P_lmax at x.
inline void legendre_table(int lmax, double x, double* out) {
  out[0] = 1.0;
  if (lmax >= 1) out[1] = x;
  for (int l = 2; l <= lmax; ++l) out[l] = ((2.0 * l - 1.0) * x * out[l - 1] - (l - 1.0) * out[l - 2]) / l;
}

}  // namespace weakflow
