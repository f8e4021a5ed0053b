#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "weakflow/model_space.hpp"

namespace weakflow {

// One time slice. Distances are scale * base, so slices sampled from a
// homothetic model share a single base matrix.
struct SampledSlice {
  double time = 0.0;
  std::shared_ptr<const Eigen::MatrixXd> base;
  double scale = 1.0;
  Eigen::VectorXd weights;
};

enum class SamplingStrategy { uniform_random, quasi_uniform };

inline const char* to_string(SamplingStrategy s) {
  return s == SamplingStrategy::uniform_random ? "uniform-random" : "quasi-uniform";
}

inline SamplingStrategy parse_sampling_strategy(std::string_view s) {
  if (s == "uniform-random") return SamplingStrategy::uniform_random;
  if (s == "quasi-uniform") return SamplingStrategy::quasi_uniform;
  throw InvalidArgument("unknown sampling strategy '" + std::string(s) + "'");
}

// Finite metric-measure space with per-slice distance matrices and weights.
// Between grid times, squared distances and weights are interpolated linearly.
class SampledSpace final : public Space {
 public:
  SampledSpace(int n, std::vector<SampledSlice> slices, Orientation orientation, bool pseudo_metric,
               std::optional<TimeInterval> interval = std::nullopt, std::string provenance = "external")
      : n_(n), slices_(std::move(slices)), orientation_(orientation), pseudo_(pseudo_metric),
        provenance_(std::move(provenance)) {
    if (n < 1) throw InvalidArgument("dimension must be >= 1");
    if (slices_.empty()) throw InvalidArgument("sampled space needs at least one slice");
    const Eigen::Index count = slices_.front().weights.size();
    if (count < 2) throw InvalidArgument("sampled space needs N >= 2 points");
    for (std::size_t k = 0; k < slices_.size(); ++k) {
      const auto& s = slices_[k];
      if (k > 0 && !(s.time > slices_[k - 1].time))
        throw InvalidArgument("time grid must be strictly increasing");
      if (!s.base || s.base->rows() != count || s.base->cols() != count || s.weights.size() != count)
        throw InvalidArgument("slice " + std::to_string(k) + " has inconsistent sizes");
      if (!(s.scale > 0.0) || !std::isfinite(s.scale))
        throw InvalidArgument("slice scale must be positive");
      validate_slice(k);
    }
    if (interval) {
      if (slices_.size() > 1 && (!same_time(interval->lo, slices_.front().time) ||
                                 !same_time(interval->hi, slices_.back().time)))
        throw InvalidArgument("interval of a multi-slice space must match its time grid");
      if (!interval->contains(slices_.front().time))
        throw InvalidArgument("interval must contain the slice time");
      interval_ = *interval;
    } else {
      interval_ = {slices_.front().time, slices_.back().time};
    }
  }

  // --- Space interface ---------------------------------------------------

  int dimension() const override { return n_; }
  TimeInterval interval() const override { return interval_; }
  Orientation orientation() const override { return orientation_; }
  bool is_static() const override { return slices_.size() == 1; }
  bool pseudo_metric() const override { return pseudo_; }
  bool closed() const override { return closed_; }
  std::string label() const override {
    return "sampled(n=" + std::to_string(n_) + ", N=" + std::to_string(size()) +
           ", slices=" + std::to_string(slices_.size()) + ", " + provenance_ + ")";
  }

  std::size_t size() const override { return static_cast<std::size_t>(slices_.front().weights.size()); }

  double distance(double t, std::size_t i, std::size_t j) const override {
    const auto [k, lam] = bracket(t);
    const auto& a = slices_[k];
    const double da = a.scale * (*a.base)(i, j);
    if (lam == 0.0) return da;
    const auto& b = slices_[k + 1];
    const double db = b.scale * (*b.base)(i, j);
    return std::sqrt((1.0 - lam) * da * da + lam * db * db);
  }

  Eigen::MatrixXd distance_matrix(double t) const override {
    const auto [k, lam] = bracket(t);
    const auto& a = slices_[k];
    if (lam == 0.0) return a.scale * (*a.base);
    const auto& b = slices_[k + 1];
    if (a.base == b.base)
      return std::sqrt((1.0 - lam) * a.scale * a.scale + lam * b.scale * b.scale) * (*a.base);
    const Eigen::ArrayXXd da = a.scale * a.base->array(), db = b.scale * b.base->array();
    return ((1.0 - lam) * da.square() + lam * db.square()).sqrt().matrix();
  }

  Eigen::VectorXd row_distances(double t, std::size_t i) const {
    const auto [k, lam] = bracket(t);
    const auto& a = slices_[k];
    Eigen::VectorXd da = a.scale * a.base->row(i).transpose();
    if (lam == 0.0) return da;
    const auto& b = slices_[k + 1];
    Eigen::VectorXd db = b.scale * b.base->row(i).transpose();
    return ((1.0 - lam) * da.array().square() + lam * db.array().square()).sqrt().matrix();
  }

  Eigen::VectorXd weights(double t) const override {
    const auto [k, lam] = bracket(t);
    if (lam == 0.0) return slices_[k].weights;
    return (1.0 - lam) * slices_[k].weights + lam * slices_[k + 1].weights;
  }

  double ball_measure(double t, std::size_t i, double r) const override {
    if (r < 0.0) throw InvalidArgument("radius must be nonnegative");
    const Eigen::VectorXd d = row_distances(t, i);
    const Eigen::VectorXd w = weights(t);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < d.size(); ++j)
      if (d[j] <= r) sum += w[j];
    return sum;
  }

  double sphere_area(double t, std::size_t i, double r) const override {
    const double delta = shell_half_width(t, r);
    return shell_weight(t, i, r, delta) / (2.0 * delta);
  }

  Eigen::MatrixXd mean_matrix(bool ball, double t, double r) const override {
    const std::size_t count = size();
    const Eigen::MatrixXd d = distance_matrix(t);
    const Eigen::VectorXd w = weights(t);
    const double delta = ball ? 0.0 : shell_half_width(t, r);
    const double lo = r - delta, hi = r + delta;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(count, count);
    std::vector<char> lonely(count, 0);
    std::vector<std::size_t> empty;
    std::mutex empty_mutex;
    parallel_for(count, [&](std::size_t i) {
      double total = 0.0;
      std::size_t members = 0;
      for (std::size_t j = 0; j < count; ++j) {
        const double dij = d(i, j);
        if (ball ? dij <= r : (dij >= lo && dij <= hi)) {
          out(i, j) = w[j];
          total += w[j];
          ++members;
        }
      }
      if (ball && members == 1 && out(i, i) > 0.0) {
        lonely[i] = 1;
        out(i, i) = 1.0;
        return;
      }
      if (!(total > 0.0)) {
        std::lock_guard lock(empty_mutex);
        empty.push_back(i);
        return;
      }
      out.row(i) /= total;
    });
    if (!empty.empty()) {
      const std::size_t first = *std::min_element(empty.begin(), empty.end());
      throw DegenerateSupport(first, std::string(ball ? "ball" : "shell") + " of radius " +
                                         std::to_string(r) + " carries no mass");
    }
    const auto n_lonely = std::count(lonely.begin(), lonely.end(), 1);
    if (n_lonely > 0) {
      const auto first = std::find(lonely.begin(), lonely.end(), 1) - lonely.begin();
      warn("ball of radius " + std::to_string(r) + " contains only its center at " +
           std::to_string(n_lonely) + " point(s) (first: " + std::to_string(first) +
           "); averaging acts as the identity there");
    }
    return out;
  }

  std::optional<double> exact_d2_rate(double t, std::size_t i, std::size_t j) const override {
    if (!origin_ || points_.rows() == 0) return std::nullopt;
    return origin_->d2_rate(t, Point(points_.row(i).transpose()), Point(points_.row(j).transpose()));
  }

  std::optional<bool> virtually_psc_hint() const override { return psc_hint_; }

  std::unique_ptr<Space> reversed(double anchor) const override {
    return std::make_unique<SampledSpace>(reversed_sampled(anchor));
  }

  SampledSpace reversed_sampled(double anchor) const {
    std::vector<SampledSlice> slices(slices_.rbegin(), slices_.rend());
    for (auto& s : slices) s.time = anchor - s.time;
    SampledSpace out(n_, std::move(slices), flipped(orientation_), pseudo_,
                     TimeInterval{anchor - interval_.hi, anchor - interval_.lo}, provenance_);
    out.points_ = points_;
    out.closed_ = closed_;
    out.psc_hint_ = psc_hint_;
    out.seed_ = seed_;
    out.strategy_ = strategy_;
    if (origin_) out.origin_ = std::make_shared<ModelSpace>(origin_->reversed_model(anchor));
    return out;
  }

  // --- sampled-specific --------------------------------------------------

  const std::vector<SampledSlice>& slices() const { return slices_; }
  std::vector<double> time_grid() const {
    std::vector<double> g;
    for (const auto& s : slices_) g.push_back(s.time);
    return g;
  }
  const std::string& provenance() const { return provenance_; }
  std::optional<std::uint64_t> seed() const { return seed_; }
  std::optional<SamplingStrategy> strategy() const { return strategy_; }

  bool has_points() const { return points_.rows() > 0; }
  const Eigen::MatrixXd& points() const { return points_; }
  Point point(std::size_t i) const { return points_.row(i).transpose(); }
  const ModelSpace* origin() const { return origin_.get(); }

  void set_points(Eigen::MatrixXd points) {
    if (points.rows() != 0 && static_cast<std::size_t>(points.rows()) != size())
      throw InvalidArgument("point coordinates do not match N");
    points_ = std::move(points);
  }
  void set_origin(std::shared_ptr<const ModelSpace> origin) { origin_ = std::move(origin); }
  void set_closed(bool closed) { closed_ = closed; }
  void set_virtually_psc_hint(std::optional<bool> hint) { psc_hint_ = hint; }
  void set_sampling(std::uint64_t seed, SamplingStrategy strategy) {
    seed_ = seed;
    strategy_ = strategy;
  }

  // Expected nearest-neighbour distance of N uniform points at time t.
  double spacing(double t) const {
    const double mass = total_mass(t);
    return std::tgamma(1.0 + 1.0 / n_) * std::pow(mass / (size() * unit_ball_volume(n_)), 1.0 / n_);
  }

  double shell_half_width(double t, double r) const { return std::max(0.1 * r, 2.0 * spacing(t)); }

  double shell_weight(double t, std::size_t i, double r, double delta) const {
    const Eigen::VectorXd d = row_distances(t, i);
    const Eigen::VectorXd w = weights(t);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < d.size(); ++j)
      if (d[j] >= r - delta && d[j] <= r + delta) sum += w[j];
    return sum;
  }

  // Number of points inside the ball (or shell) used by the averaging operators.
  std::size_t support_count(bool ball, double t, std::size_t i, double r) const {
    const Eigen::VectorXd d = row_distances(t, i);
    const double delta = ball ? 0.0 : shell_half_width(t, r);
    std::size_t c = 0;
    for (Eigen::Index j = 0; j < d.size(); ++j)
      if (ball ? d[j] <= r : (d[j] >= r - delta && d[j] <= r + delta)) ++c;
    return c;
  }

 private:
  std::pair<std::size_t, double> bracket(double t) const {
    if (!interval_.contains(t))
      throw InvalidArgument("time " + std::to_string(t) + " outside the sampled interval [" +
                            std::to_string(interval_.lo) + ", " + std::to_string(interval_.hi) + "]");
    if (slices_.size() == 1) return {0, 0.0};
    if (t <= slices_.front().time) return {0, 0.0};
    if (t >= slices_.back().time) return {slices_.size() - 1, 0.0};
    const auto it = std::upper_bound(slices_.begin(), slices_.end(), t,
                                     [](double v, const SampledSlice& s) { return v < s.time; });
    const std::size_t k = static_cast<std::size_t>(it - slices_.begin()) - 1;
    const double lam = (t - slices_[k].time) / (slices_[k + 1].time - slices_[k].time);
    if (same_time(t, slices_[k].time)) return {k, 0.0};
    return {k, lam};
  }

  void validate_slice(std::size_t k) const {
    const auto& s = slices_[k];
    const Eigen::MatrixXd& d = *s.base;
    const Eigen::Index count = d.rows();
    const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < count; ++i) {
      if (d(i, i) != 0.0) throw InvalidArgument("slice " + std::to_string(k) + ": nonzero diagonal");
      for (Eigen::Index j = i + 1; j < count; ++j) {
        const double a = d(i, j), b = d(j, i);
        if (!std::isfinite(a) || a < 0.0)
          throw InvalidArgument("slice " + std::to_string(k) + ": distances must be finite and >= 0");
        if (std::abs(a - b) > 1e-9 * scale)
          throw InvalidArgument("slice " + std::to_string(k) + ": distance matrix is not symmetric");
        if (a == 0.0 && !pseudo_)
          throw InvalidArgument("slice " + std::to_string(k) + ": points " + std::to_string(i) + " and " +
                                std::to_string(j) + " coincide; declare a pseudo metric to allow it");
      }
    }
    if (!s.weights.allFinite() || s.weights.minCoeff() < 0.0)
      throw InvalidArgument("slice " + std::to_string(k) + ": weights must be finite and >= 0");
    if (!(s.weights.sum() > 0.0))
      throw InvalidArgument("slice " + std::to_string(k) + ": total mass must be positive");
  }

  int n_;
  std::vector<SampledSlice> slices_;
  Orientation orientation_;
  bool pseudo_;
  std::string provenance_;
  TimeInterval interval_;
  bool closed_ = true;
  std::optional<bool> psc_hint_;
  Eigen::MatrixXd points_;
  std::shared_ptr<const ModelSpace> origin_;
  std::optional<std::uint64_t> seed_;
  std::optional<SamplingStrategy> strategy_;
};

// ---------------------------------------------------------------------------
// sampling from a model

struct SampleOptions {
  // Slice times; empty means one slice for static models and 11 uniform
  // slices over the interval otherwise.
  std::vector<double> time_grid;
};

namespace detail {

inline Eigen::MatrixXd random_rotation(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = g(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < dim; ++i)
    if (r(i, i) < 0) q.col(i) = -q.col(i);
  return q;
}

inline Eigen::MatrixXd quasi_uniform_points(const ModelSpace& model, std::size_t count, std::mt19937_64& rng) {
  const int n = model.dimension();
  Eigen::MatrixXd pts(count, model.ambient_dimension());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (model.is_sphere()) {
    if (n == 1) {
      const double offset = u(rng);
      for (std::size_t i = 0; i < count; ++i) {
        const double a = 2.0 * std::numbers::pi * (i + offset) / count;
        pts(i, 0) = std::cos(a);
        pts(i, 1) = std::sin(a);
      }
      return pts;
    }
    if (n != 2) throw UnsupportedOracle("quasi-uniform sphere sampling needs n <= 2");
    // Fibonacci lattice, randomly rotated
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const Eigen::Matrix3d rot = random_rotation(3, rng);
    for (std::size_t i = 0; i < count; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / count;
      const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double p = golden * i;
      Eigen::Vector3d x(s * std::cos(p), s * std::sin(p), z);
      pts.row(i) = (rot * x).transpose();
    }
    return pts;
  }
  Eigen::VectorXd offset(n);
  for (int d = 0; d < n; ++d) offset[d] = u(rng);
  const int side = static_cast<int>(std::llround(std::pow(double(count), 1.0 / n)));
  std::size_t total = 1;
  for (int d = 0; d < n; ++d) total *= side;
  if (total == count) {
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t rest = i;
      for (int d = 0; d < n; ++d) {
        const double v = (double(rest % side) + offset[d]) / side;
        pts(i, d) = v - std::floor(v);
        rest /= side;
      }
    }
    return pts;
  }
  // Kronecker sequence with the generalized golden ratio
  double g = 2.0;
  for (int it = 0; it < 64; ++it) g = std::pow(1.0 + g, 1.0 / (n + 1));
  for (std::size_t i = 0; i < count; ++i)
    for (int d = 0; d < n; ++d) {
      const double v = offset[d] + (i + 1) * std::pow(1.0 / g, d + 1);
      pts(i, d) = v - std::floor(v);
    }
  return pts;
}

}  // namespace detail

inline SampledSpace sample(const ModelSpace& model, std::size_t count, std::uint64_t seed,
                           SamplingStrategy strategy, SampleOptions options = {}) {
  if (count < 2) throw InvalidArgument("sample: N must be >= 2");
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd pts(count, model.ambient_dimension());
  if (strategy == SamplingStrategy::uniform_random) {
    for (std::size_t i = 0; i < count; ++i) pts.row(i) = model.random_point(rng).transpose();
  } else {
    pts = detail::quasi_uniform_points(model, count, rng);
  }
  const TimeInterval iv = model.interval();
  std::vector<double> grid = options.time_grid;
  if (grid.empty()) {
    if (model.is_static()) {
      grid = {iv.lo};
    } else {
      for (int k = 0; k <= 10; ++k) grid.push_back(iv.lo + iv.length() * k / 10.0);
    }
  }
  for (double t : grid)
    if (!iv.contains(t)) throw InvalidArgument("sample: slice time outside the model interval");

  const double t0 = grid.front();
  const double l0 = model.length(t0);
  auto base = std::make_shared<Eigen::MatrixXd>(count, count);
  parallel_for(count, [&](std::size_t i) {
    const Point xi = pts.row(i).transpose();
    (*base)(i, i) = 0.0;
    for (std::size_t j = 0; j < count; ++j)
      if (j != i) (*base)(i, j) = model.distance(t0, xi, Point(pts.row(j).transpose())) / l0 * model.base_length();
  });
  bool pseudo = false;
  for (std::size_t i = 0; i < count && !pseudo; ++i)
    for (std::size_t j = i + 1; j < count; ++j)
      if ((*base)(i, j) == 0.0) {
        pseudo = true;
        break;
      }
  if (pseudo) warn("sample: coincident points drawn; the space is flagged as a pseudo metric");

  std::vector<SampledSlice> slices;
  for (double t : grid) {
    SampledSlice s;
    s.time = t;
    s.base = base;
    s.scale = model.length(t) / model.base_length();
    s.weights = Eigen::VectorXd::Constant(count, model.total_volume(t) / count);
    slices.push_back(std::move(s));
  }
  std::optional<TimeInterval> interval;
  if (grid.size() == 1) interval = iv;
  SampledSpace out(model.dimension(), std::move(slices), model.orientation(), pseudo, interval,
                   "sampled-from-analytic");
  out.set_points(std::move(pts));
  out.set_origin(std::make_shared<ModelSpace>(model));
  out.set_sampling(seed, strategy);
  out.set_virtually_psc_hint(model.virtually_psc_hint());
  return out;
}

// ---------------------------------------------------------------------------
// JSON container

inline nlohmann::json to_json(const SampledSpace& space) {
  nlohmann::json j;
  j["format"] = "weakflow.sampled/1";
  j["n"] = space.dimension();
  j["time_grid"] = space.time_grid();
  j["interval"] = {space.interval().lo, space.interval().hi};
  j["orientation"] = to_string(space.orientation());
  j["pseudo_metric"] = space.pseudo_metric();
  j["closed"] = space.closed();
  if (space.has_points()) {
    nlohmann::json pts = nlohmann::json::array();
    for (Eigen::Index i = 0; i < space.points().rows(); ++i) {
      std::vector<double> row(space.points().cols());
      for (Eigen::Index c = 0; c < space.points().cols(); ++c) row[c] = space.points()(i, c);
      pts.push_back(row);
    }
    j["points"] = pts;
  }
  nlohmann::json dist = nlohmann::json::array(), wts = nlohmann::json::array();
  for (const auto& s : space.slices()) {
    const std::size_t n = space.size();
    std::vector<double> flat(n * n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) flat[a * n + b] = s.scale * (*s.base)(a, b);
    dist.push_back(flat);
    wts.push_back(std::vector<double>(s.weights.data(), s.weights.data() + s.weights.size()));
  }
  j["distances"] = dist;
  j["weights"] = wts;
  nlohmann::json prov{{"kind", space.provenance()}};
  if (space.seed()) prov["seed"] = *space.seed();
  if (space.strategy()) prov["strategy"] = to_string(*space.strategy());
  j["provenance"] = prov;
  return j;
}

inline SampledSpace sampled_space_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> allowed{"format", "n", "time_grid", "interval", "orientation",
                                                "pseudo_metric", "closed", "points", "distances",
                                                "weights", "provenance"};
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw InvalidArgument("sampled space JSON: unknown key '" + key + "'");
  if (j.value("format", "") != "weakflow.sampled/1")
    throw InvalidArgument("sampled space JSON: format must be weakflow.sampled/1");
  const int n = j.at("n").get<int>();
  const auto grid = j.at("time_grid").get<std::vector<double>>();
  const auto& dist = j.at("distances");
  const auto& wts = j.at("weights");
  if (dist.size() != grid.size() || wts.size() != grid.size())
    throw InvalidArgument("sampled space JSON: one distance matrix and weight vector per slice");
  std::vector<SampledSlice> slices;
  std::size_t count = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto w = wts[k].get<std::vector<double>>();
    const auto flat = dist[k].get<std::vector<double>>();
    if (k == 0) count = w.size();
    if (w.size() != count || flat.size() != count * count)
      throw InvalidArgument("sampled space JSON: slice " + std::to_string(k) + " has wrong sizes");
    auto base = std::make_shared<Eigen::MatrixXd>(count, count);
    for (std::size_t a = 0; a < count; ++a)
      for (std::size_t b = 0; b < count; ++b) (*base)(a, b) = flat[a * count + b];
    slices.push_back({grid[k], base, 1.0, Eigen::Map<const Eigen::VectorXd>(w.data(), count)});
  }
  std::optional<TimeInterval> interval;
  if (j.contains("interval")) {
    const auto iv = j.at("interval").get<std::vector<double>>();
    if (iv.size() != 2) throw InvalidArgument("sampled space JSON: interval needs two entries");
    interval = TimeInterval{iv[0], iv[1]};
  }
  const std::string orient = j.value("orientation", "backward");
  if (orient != "forward" && orient != "backward")
    throw InvalidArgument("sampled space JSON: orientation must be forward or backward");
  std::string provenance = "external";
  if (j.contains("provenance")) provenance = j.at("provenance").value("kind", "external");
  SampledSpace out(n, std::move(slices), orient == "forward" ? Orientation::forward : Orientation::backward,
                   j.value("pseudo_metric", false), interval, provenance);
  out.set_closed(j.value("closed", false));
  if (j.contains("points")) {
    const auto& pts = j.at("points");
    if (pts.size() != count) throw InvalidArgument("sampled space JSON: points do not match N");
    const std::size_t dim = pts.empty() ? 0 : pts[0].size();
    Eigen::MatrixXd p(count, dim);
    for (std::size_t a = 0; a < count; ++a) {
      const auto row = pts[a].get<std::vector<double>>();
      if (row.size() != dim) throw InvalidArgument("sampled space JSON: ragged points");
      for (std::size_t c = 0; c < dim; ++c) p(a, c) = row[c];
    }
    out.set_points(std::move(p));
  }
  return out;
}

inline SampledSpace time_reversed(const SampledSpace& space, double anchor) {
  return space.reversed_sampled(anchor);
}

}  // namespace weakflow
