#pragma once

#include <nlohmann/json.hpp>

#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "weakflow/propagators.hpp"

namespace weakflow {

// ---------------------------------------------------------------------------
// costs

// c(d) for a convex nondecreasing profile with c(0) = 0.
class CostSpec {
 public:
  enum class Kind { distance_squared, distance, polynomial, piecewise };

  static CostSpec distance_squared() { return CostSpec(Kind::distance_squared); }
  static CostSpec distance() { return CostSpec(Kind::distance); }

  // sum_k c_k d^k for k >= 1 with c_k >= 0.
  static CostSpec polynomial(std::vector<double> coefficients) {
    if (coefficients.empty()) throw InvalidArgument("polynomial cost needs coefficients");
    for (double c : coefficients)
      if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidArgument("polynomial cost coefficients must be >= 0");
    CostSpec s(Kind::polynomial);
    s.coefficients_ = std::move(coefficients);
    return s;
  }

  // Piecewise-linear profile through (x_k, y_k), starting at (0, 0) and
  // extended linearly past the last breakpoint.
  static CostSpec piecewise(std::vector<std::pair<double, double>> points) {
    if (points.size() < 2) throw InvalidArgument("piecewise cost needs at least two breakpoints");
    if (points.front().first != 0.0 || points.front().second != 0.0)
      throw InvalidArgument("piecewise cost must start at (0, 0)");
    double prev_slope = 0.0;
    for (std::size_t k = 1; k < points.size(); ++k) {
      const double dx = points[k].first - points[k - 1].first;
      if (!(dx > 0.0)) throw InvalidArgument("piecewise cost breakpoints must increase");
      const double slope = (points[k].second - points[k - 1].second) / dx;
      if (slope < 0.0) throw InvalidArgument("piecewise cost must be nondecreasing");
      if (slope < prev_slope - 1e-12 * std::max(1.0, prev_slope))
        throw InvalidArgument("piecewise cost must be convex");
      prev_slope = slope;
    }
    CostSpec s(Kind::piecewise);
    s.points_ = std::move(points);
    return s;
  }

  Kind kind() const { return kind_; }

  // Cost evaluated at the comparison time (default) or at a frozen time.
  std::optional<double> frozen_time;

  double operator()(double d) const {
    switch (kind_) {
      case Kind::distance_squared: return d * d;
      case Kind::distance: return d;
      case Kind::polynomial: {
        double s = 0.0, p = d;
        for (double c : coefficients_) {
          s += c * p;
          p *= d;
        }
        return s;
      }
      case Kind::piecewise: {
        const auto& pts = points_;
        std::size_t k = 1;
        while (k + 1 < pts.size() && d > pts[k].first) ++k;
        const auto [x0, y0] = pts[k - 1];
        const auto [x1, y1] = pts[k];
        return y0 + (y1 - y0) * (d - x0) / (x1 - x0);
      }
    }
    return 0.0;
  }

  std::string label() const {
    switch (kind_) {
      case Kind::distance_squared: return "d^2";
      case Kind::distance: return "d";
      case Kind::polynomial: {
        std::string s;
        for (std::size_t k = 0; k < coefficients_.size(); ++k) {
          if (coefficients_[k] == 0.0) continue;
          if (!s.empty()) s += "+";
          if (coefficients_[k] != 1.0) s += format_number(coefficients_[k]) + "*";
          s += k == 0 ? "d" : "d^" + std::to_string(k + 1);
        }
        return s.empty() ? "0" : s;
      }
      case Kind::piecewise: return "piecewise(" + std::to_string(points_.size()) + ")";
    }
    return "?";
  }

  // Checks c(0) = 0, monotonicity and midpoint convexity on a grid over [0, dmax].
  void verify(double dmax, int probes = 256) const {
    if ((*this)(0.0) != 0.0) throw InvalidArgument("cost must vanish at distance 0");
    double prev = 0.0;
    for (int k = 1; k <= probes; ++k) {
      const double a = dmax * (k - 1) / probes, b = dmax * k / probes;
      const double cb = (*this)(b);
      const double tol = 1e-12 * std::max(1.0, std::abs(cb));
      if (cb < prev - tol) throw InvalidArgument("cost is not nondecreasing");
      if ((*this)(0.5 * (a + b)) > 0.5 * ((*this)(a) + cb) + tol) throw InvalidArgument("cost is not convex");
      prev = cb;
    }
  }

 private:
  explicit CostSpec(Kind k) : kind_(k) {}
  Kind kind_;
  std::vector<double> coefficients_;
  std::vector<std::pair<double, double>> points_;
};

inline Eigen::MatrixXd cost_matrix(const Space& space, double tau, const CostSpec& cost) {
  const double t = cost.frozen_time.value_or(tau);
  require_time(space, t, "cost_matrix");
  Eigen::MatrixXd c = space.distance_matrix(t);
  parallel_for(static_cast<std::size_t>(c.cols()), [&](std::size_t j) {
    for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, j) = cost(c(i, j));
  });
  return c;
}

// ---------------------------------------------------------------------------
// plans and solvers

struct PlanEntry {
  std::size_t i;
  std::size_t j;
  double mass;
};

struct TransportPlan {
  std::size_t size = 0;
  std::vector<PlanEntry> entries;  // sparse coupling
  double row_residual = 0.0;       // max |row sum - mu1|
  double col_residual = 0.0;       // max |col sum - mu2|
  double total_cost = 0.0;

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(size, size);
    for (const auto& e : entries) p(e.i, e.j) += e.mass;
    return p;
  }
};

enum class SolverKind { exact, entropic };

struct SolverOptions {
  SolverKind kind = SolverKind::exact;
  double epsilon = 1e-3;  // entropic regularization, cost units
  int max_iterations = 100000;
  double tolerance = 1e-9;  // entropic marginal L1 error
  std::size_t max_exact_size = 512;
};

struct TransportResult {
  double total_cost = 0.0;
  TransportPlan plan;
  SolverKind solver = SolverKind::exact;
  double lower_bound = 0.0;  // equals total_cost in exact mode
  double gap = 0.0;          // upper - lower certificate
  std::size_t iterations = 0;
  bool pseudo_metric = false;
};

namespace detail {

struct SimplexSolution {
  std::vector<PlanEntry> flows;
  std::size_t iterations = 0;
};

// Transportation simplex on the bipartite tree basis. Both marginals strictly
// positive with equal sums. Degeneracy is avoided by a Charnes perturbation;
// flows of the optimal basis are recomputed from the unperturbed marginals.
inline SimplexSolution transportation_simplex(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                              const Eigen::MatrixXd& c, std::size_t max_iterations) {
  const int m = static_cast<int>(a.size()), n = static_cast<int>(b.size());
  SimplexSolution out;
  if (m == 1 || n == 1) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out.flows.push_back({std::size_t(i), std::size_t(j), m == 1 ? b[j] : a[i]});
    return out;
  }
  const int nodes = m + n;
  const double total = a.sum();
  const double delta = 1e-12 * total;
  Eigen::VectorXd sa = a.array() + delta, sb = b;
  sb[n - 1] += m * delta;

  std::vector<int> ei, ej;
  std::vector<double> ex;
  {
    int i = 0, j = 0;
    double ra = sa[0], rb = sb[0];
    while (true) {
      const double x = std::min(ra, rb);
      ei.push_back(i);
      ej.push_back(j);
      ex.push_back(std::max(0.0, x));
      ra -= x;
      rb -= x;
      if (i == m - 1 && j == n - 1) break;
      if (j == n - 1 || (i < m - 1 && ra <= rb)) {
        ++i;
        ra = sa[i];
      } else {
        ++j;
        rb = sb[j];
      }
    }
  }
  std::vector<std::vector<int>> adj(nodes);
  auto node_a = [&](int e) { return ei[e]; };
  auto node_b = [&](int e) { return m + ej[e]; };
  auto other = [&](int e, int x) { return x == node_a(e) ? node_b(e) : node_a(e); };
  for (int e = 0; e < int(ei.size()); ++e) {
    adj[node_a(e)].push_back(e);
    adj[node_b(e)].push_back(e);
  }

  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;
  std::vector<double> pot(nodes);
  std::vector<int> parent(nodes), depth(nodes);
  std::vector<char> seen(nodes);
  std::vector<int> queue(nodes);
  const int block = std::max(1, static_cast<int>(std::ceil(std::sqrt(double(m)))));
  int cursor = 0;

  for (std::size_t it = 0;; ++it) {
    if (it >= max_iterations)
      throw NonConvergence("transport simplex hit the iteration cap (" + std::to_string(max_iterations) + ")");
    std::fill(seen.begin(), seen.end(), 0);
    int head = 0, tail = 0;
    queue[tail++] = 0;
    seen[0] = 1;
    pot[0] = 0.0;
    parent[0] = -1;
    depth[0] = 0;
    while (head < tail) {
      const int x = queue[head++];
      for (int e : adj[x]) {
        const int y = other(e, x);
        if (seen[y]) continue;
        seen[y] = 1;
        pot[y] = c(ei[e], ej[e]) - pot[x];
        parent[y] = e;
        depth[y] = depth[x] + 1;
        queue[tail++] = y;
      }
    }
    if (tail != nodes) throw Error("transport simplex: basis is not a spanning tree");

    // block pricing over rows
    int bi = -1, bj = -1;
    double best = -tol;
    for (int scanned = 0; scanned < m; ++scanned) {
      const int i = (cursor + scanned) % m;
      for (int j = 0; j < n; ++j) {
        const double r = c(i, j) - pot[i] - pot[m + j];
        if (r < best) {
          best = r;
          bi = i;
          bj = j;
        }
      }
      if (bi >= 0 && (scanned + 1) % block == 0) {
        cursor = (i + 1) % m;
        break;
      }
    }
    if (bi < 0) {
      out.iterations = it;
      break;
    }

    // cycle: entering (+), then tree path from column node to row node, alternating from (-)
    std::vector<int> up_a, up_b;
    int x = bi, y = m + bj;
    while (depth[x] > depth[y]) {
      up_a.push_back(parent[x]);
      x = other(parent[x], x);
    }
    while (depth[y] > depth[x]) {
      up_b.push_back(parent[y]);
      y = other(parent[y], y);
    }
    while (x != y) {
      up_a.push_back(parent[x]);
      x = other(parent[x], x);
      up_b.push_back(parent[y]);
      y = other(parent[y], y);
    }
    std::vector<int> path = up_b;
    path.insert(path.end(), up_a.rbegin(), up_a.rend());
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (std::size_t k = 0; k < path.size(); k += 2)
      if (ex[path[k]] < theta) {
        theta = ex[path[k]];
        leaving = path[k];
      }
    for (std::size_t k = 0; k < path.size(); ++k) ex[path[k]] += (k % 2 == 0) ? -theta : theta;

    auto drop = [&](int node, int e) {
      auto& v = adj[node];
      v.erase(std::find(v.begin(), v.end(), e));
    };
    drop(node_a(leaving), leaving);
    drop(node_b(leaving), leaving);
    ei[leaving] = bi;
    ej[leaving] = bj;
    ex[leaving] = theta;
    adj[node_a(leaving)].push_back(leaving);
    adj[node_b(leaving)].push_back(leaving);
  }

  // basic flows for the original marginals by leaf elimination
  std::vector<double> rem(nodes);
  for (int i = 0; i < m; ++i) rem[i] = a[i];
  for (int j = 0; j < n; ++j) rem[m + j] = b[j];
  std::vector<int> deg(nodes);
  for (int v = 0; v < nodes; ++v) deg[v] = static_cast<int>(adj[v].size());
  std::vector<char> used(ei.size(), 0);
  std::vector<double> flow(ei.size(), 0.0);
  std::deque<int> leaves;
  for (int v = 0; v < nodes; ++v)
    if (deg[v] == 1) leaves.push_back(v);
  while (!leaves.empty()) {
    const int v = leaves.front();
    leaves.pop_front();
    if (deg[v] != 1) continue;
    int e = -1;
    for (int cand : adj[v])
      if (!used[cand]) {
        e = cand;
        break;
      }
    used[e] = 1;
    flow[e] = rem[v];
    const int w = other(e, v);
    rem[w] -= rem[v];
    rem[v] = 0.0;
    --deg[v];
    if (--deg[w] == 1) leaves.push_back(w);
  }
  for (std::size_t e = 0; e < ei.size(); ++e) {
    const double f = flow[e];
    if (f < -1e-9 * total) warn("transport simplex: clamping basic flow " + format_number(f));
    if (f > 0.0) out.flows.push_back({std::size_t(ei[e]), std::size_t(ej[e]), f});
  }
  return out;
}

inline double log_sum_exp(const double* v, Eigen::Index count, Eigen::Index stride) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < count; ++k) mx = std::max(mx, v[k * stride]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (Eigen::Index k = 0; k < count; ++k) s += std::exp(v[k * stride] - mx);
  return mx + std::log(s);
}

struct SinkhornSolution {
  Eigen::MatrixXd plan;
  double upper = 0.0;
  double lower = 0.0;
  std::size_t iterations = 0;
};

// Log-domain Sinkhorn, rounded onto the transport polytope for a feasible upper
// bound; the c-transform of the row potential gives a dual lower bound.
inline SinkhornSolution sinkhorn(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& c,
                                 const SolverOptions& opt) {
  if (!(opt.epsilon > 0.0)) throw InvalidArgument("entropic epsilon must be positive");
  const Eigen::Index m = a.size(), n = b.size();
  const double eps = opt.epsilon;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(m), g = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd la = a.array().log(), lb = b.array().log();
  Eigen::MatrixXd work(m, n);
  std::size_t it = 0;
  bool converged = false;
  for (; it < std::size_t(opt.max_iterations); ++it) {
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < m; ++i) work(i, j) = (g[j] - c(i, j)) / eps;
    for (Eigen::Index i = 0; i < m; ++i) f[i] = eps * (la[i] - log_sum_exp(&work(i, 0), n, m));
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < m; ++i) work(i, j) = (f[i] - c(i, j)) / eps;
    for (Eigen::Index j = 0; j < n; ++j) g[j] = eps * (lb[j] - log_sum_exp(&work(0, j), m, 1));
    if (it % 10 == 9) {
      double err = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        double row = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) row += std::exp((f[i] + g[j] - c(i, j)) / eps);
        err += std::abs(row - a[i]);
      }
      if (err < opt.tolerance) {
        converged = true;
        ++it;
        break;
      }
    }
  }
  if (!converged)
    throw NonConvergence("Sinkhorn did not reach marginal error " + format_number(opt.tolerance) + " in " +
                         std::to_string(opt.max_iterations) + " iterations");
  SinkhornSolution s;
  s.iterations = it;
  Eigen::MatrixXd p(m, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) p(i, j) = std::exp((f[i] + g[j] - c(i, j)) / eps);
  const Eigen::VectorXd x = (a.array() / p.rowwise().sum().array()).min(1.0);
  p = x.asDiagonal() * p;
  const Eigen::VectorXd y = (b.array() / p.colwise().sum().transpose().array()).min(1.0);
  p = p * y.asDiagonal();
  const Eigen::VectorXd ea = a - p.rowwise().sum(), eb = b - p.colwise().sum().transpose();
  const double norm = ea.lpNorm<1>();
  if (norm > 0.0) p += ea * eb.transpose() / norm;
  s.plan = std::move(p);
  s.upper = (s.plan.array() * c.array()).sum();
  double lower = f.dot(a);
  for (Eigen::Index j = 0; j < n; ++j) {
    double gj = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) gj = std::min(gj, c(i, j) - f[i]);
    lower += b[j] * gj;
  }
  s.lower = lower;
  return s;
}

}  // namespace detail

// Optimal transport between two mass vectors on one slice.
inline TransportResult ot_cost_matrix(const Eigen::MatrixXd& cost, const Eigen::VectorXd& mu1,
                                      const Eigen::VectorXd& mu2, const SolverOptions& options = {}) {
  const Eigen::Index n = cost.rows();
  if (cost.cols() != n || mu1.size() != n || mu2.size() != n)
    throw InvalidArgument("ot_cost: measure and cost sizes differ");
  if (!mu1.allFinite() || !mu2.allFinite() || mu1.minCoeff() < 0.0 || mu2.minCoeff() < 0.0)
    throw InvalidArgument("ot_cost: masses must be finite and nonnegative");
  const double s1 = mu1.sum(), s2 = mu2.sum();
  if (!(s1 > 0.0)) throw InvalidArgument("ot_cost: measures must carry positive mass");
  if (std::abs(s1 - s2) > 1e-8)
    throw InfeasibleMarginals("ot_cost: mass mismatch " + format_number(s1) + " vs " + format_number(s2));

  std::vector<Eigen::Index> rows, cols;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mu1[i] > 0.0) rows.push_back(i);
    if (mu2[i] > 0.0) cols.push_back(i);
  }
  Eigen::VectorXd a(rows.size()), b(cols.size());
  for (std::size_t k = 0; k < rows.size(); ++k) a[k] = mu1[rows[k]];
  for (std::size_t k = 0; k < cols.size(); ++k) b[k] = mu2[cols[k]];
  b *= s1 / s2;
  Eigen::MatrixXd c(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) c(i, j) = cost(rows[i], cols[j]);

  TransportResult out;
  out.solver = options.kind;
  out.plan.size = static_cast<std::size_t>(n);
  if (options.kind == SolverKind::exact) {
    if (std::max(rows.size(), cols.size()) > options.max_exact_size)
      throw InvalidArgument("ot_cost: exact mode supports at most " + std::to_string(options.max_exact_size) +
                            " support points; use entropic mode");
    const auto sol = detail::transportation_simplex(a, b, c, std::max<std::size_t>(100000, 50 * n * n));
    for (const auto& e : sol.flows) out.plan.entries.push_back({std::size_t(rows[e.i]), std::size_t(cols[e.j]), e.mass});
    out.iterations = sol.iterations;
  } else {
    const auto sol = detail::sinkhorn(a, b, c, options);
    for (Eigen::Index i = 0; i < sol.plan.rows(); ++i)
      for (Eigen::Index j = 0; j < sol.plan.cols(); ++j)
        if (sol.plan(i, j) > 0.0) out.plan.entries.push_back({std::size_t(rows[i]), std::size_t(cols[j]), sol.plan(i, j)});
    out.iterations = sol.iterations;
    out.lower_bound = sol.lower;
  }
  Eigen::VectorXd rs = Eigen::VectorXd::Zero(n), cs = Eigen::VectorXd::Zero(n);
  double total = 0.0;
  for (const auto& e : out.plan.entries) {
    rs[e.i] += e.mass;
    cs[e.j] += e.mass;
    total += e.mass * cost(e.i, e.j);
  }
  out.plan.row_residual = (rs - mu1).cwiseAbs().maxCoeff();
  out.plan.col_residual = (cs - mu2).cwiseAbs().maxCoeff();
  out.plan.total_cost = total;
  out.total_cost = total;
  if (options.kind == SolverKind::exact) out.lower_bound = total;
  out.gap = std::max(0.0, out.total_cost - out.lower_bound);
  return out;
}

inline TransportResult ot_cost(const Space& space, double tau, const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2,
                               const CostSpec& cost, const SolverOptions& options = {}) {
  auto r = ot_cost_matrix(cost_matrix(space, tau, cost), mu1, mu2, options);
  r.pseudo_metric = space.pseudo_metric();
  return r;
}

inline double wasserstein(const Space& space, double tau, const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2,
                          int p, const SolverOptions& options = {}) {
  if (p != 1 && p != 2) throw InvalidArgument("wasserstein: p must be 1 or 2");
  const auto r = ot_cost(space, tau, mu1, mu2, p == 1 ? CostSpec::distance() : CostSpec::distance_squared(), options);
  return p == 1 ? r.total_cost : std::sqrt(std::max(0.0, r.total_cost));
}

inline std::string plan_csv(const TransportPlan& plan) {
  std::string out = "i,j,mass\n";
  for (const auto& e : plan.entries)
    out += std::to_string(e.i) + "," + std::to_string(e.j) + "," + format_number(e.mass) + "\n";
  return out;
}

inline nlohmann::json to_json(const TransportResult& r) {
  return {{"total_cost", r.total_cost},
          {"lower_bound", r.lower_bound},
          {"gap", r.gap},
          {"solver", r.solver == SolverKind::exact ? "exact" : "entropic"},
          {"iterations", r.iterations},
          {"row_residual", r.plan.row_residual},
          {"col_residual", r.plan.col_residual},
          {"pseudo_metric", r.pseudo_metric}};
}

// ---------------------------------------------------------------------------
// formal dynamic diffusions

struct DiffusionInit {
  enum class Kind { density, delta };
  Kind kind = Kind::delta;
  Eigen::VectorXd density;
  std::size_t point = 0;

  static DiffusionInit delta(std::size_t point) { return {Kind::delta, {}, point}; }
  static DiffusionInit from_density(Eigen::VectorXd density) { return {Kind::density, std::move(density), 0}; }
};

struct Diffusion {
  std::vector<double> tau_grid;
  std::vector<Eigen::VectorXd> densities;  // against the slice weights
  std::vector<double> renormalization;     // factor applied at each slice
  DiffusionInit init;
  ChernoffSchedule schedule;
  std::uint64_t space_id = 0;

  // Mass vector at slice k.
  Eigen::VectorXd masses(const Space& space, std::size_t k) const {
    return densities.at(k).cwiseProduct(space.weights(tau_grid.at(k)));
  }
};

// Densities carried slice to slice by the dynamic conjugate propagator, with
// negatives clipped (tolerance 1e-10 relative) and mass renormalized to 1.
inline Diffusion make_diffusion(const Space& space, double tau0, const DiffusionInit& init,
                                const std::vector<double>& tau_grid, const ChernoffSchedule& schedule) {
  if (tau_grid.empty() || !same_time(tau_grid.front(), tau0))
    throw InvalidArgument("make_diffusion: time grid must start at tau0");
  for (std::size_t k = 1; k < tau_grid.size(); ++k)
    if (!(tau_grid[k] > tau_grid[k - 1])) throw InvalidArgument("make_diffusion: time grid must increase");
  if (!space.is_static() && space.orientation() != Orientation::backward)
    throw InvalidArgument("make_diffusion: needs a backward-oriented space");
  for (double t : tau_grid) require_time(space, t, "make_diffusion");

  Diffusion d;
  d.tau_grid = tau_grid;
  d.init = init;
  d.schedule = schedule;
  d.space_id = space.id();
  Eigen::VectorXd u;
  if (init.kind == DiffusionInit::Kind::delta) {
    u = delta_density(space, tau0, init.point).values;
    d.renormalization.push_back(1.0);
  } else {
    if (static_cast<std::size_t>(init.density.size()) != space.size())
      throw InvalidArgument("make_diffusion: initial density has the wrong size");
    if (!init.density.allFinite() || init.density.minCoeff() < 0.0)
      throw InvalidArgument("make_diffusion: initial density must be finite and nonnegative");
    const double mass = init.density.dot(space.weights(tau0));
    if (!(mass > 0.0)) throw InvalidArgument("make_diffusion: initial density carries no mass");
    u = init.density / mass;
    d.renormalization.push_back(1.0 / mass);
  }
  d.densities.push_back(u);
  for (std::size_t k = 1; k < tau_grid.size(); ++k) {
    u = dynamic_conjugate(space, tau_grid[k - 1], tau_grid[k], schedule, make_field(space, tau_grid[k - 1], u))
            .field.values;
    const double floor = -1e-10 * std::max(1.0, u.cwiseAbs().maxCoeff());
    const double lowest = u.minCoeff();
    if (lowest < floor) {
      Eigen::Index where = 0;
      u.minCoeff(&where);
      throw NegativeDensity("make_diffusion: density " + format_number(lowest) + " at point " +
                            std::to_string(where) + ", tau=" + format_number(tau_grid[k]));
    }
    if (lowest < 0.0) {
      warn("make_diffusion: clipped negative density " + format_number(lowest) + " at tau=" +
           format_number(tau_grid[k]));
      u = u.cwiseMax(0.0);
    }
    const double mass = u.dot(space.weights(tau_grid[k]));
    if (!(mass > 0.0)) throw NegativeDensity("make_diffusion: density lost all mass");
    u /= mass;
    d.renormalization.push_back(1.0 / mass);
    d.densities.push_back(u);
  }
  return d;
}

}  // namespace weakflow
