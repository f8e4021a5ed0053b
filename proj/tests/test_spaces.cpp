#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "weakflow/geometry.hpp"

using namespace weakflow;
constexpr double pi = std::numbers::pi;

namespace {

Point vec(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) p[k++] = x;
  return p;
}

// Independent oracles
double cap_area_2sphere(double R, double r) { return 2.0 * pi * R * R * (1.0 - std::cos(r / R)); }
double angle(const Point& x, const Point& y) { return std::acos(std::clamp(x.dot(y) / x.norm() / y.norm(), -1.0, 1.0)); }

}  // namespace

TEST(ModelSphere, AntipodalDistanceIsPi) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::stationary());
  EXPECT_NEAR(s.distance(0.0, vec({0, 0, 1}), vec({0, 0, -1})), pi, 1e-12);
}

TEST(ModelSphere, RicciBackwardRadiusAtTauOneAndHalf) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 2.0}});
  EXPECT_NEAR(s.length(1.5), 2.0, 1e-12);
  EXPECT_NEAR(s.distance(1.5, vec({1, 0, 0}), vec({-1, 0, 0})), 2.0 * pi, 1e-12);
}

TEST(ModelSphere, InitialRadiusInDimensionThree) {
  auto s = make_round_sphere(3, 1.0, FlowLaw::ricci_backward());
  EXPECT_DOUBLE_EQ(s.length(0.0), 1.0);
}

TEST(ModelSphere, RejectsBadParameters) {
  EXPECT_THROW(make_round_sphere(2, 0.0, FlowLaw::stationary()), InvalidArgument);
  EXPECT_THROW(make_round_sphere(2, -1.0, FlowLaw::stationary()), InvalidArgument);
  EXPECT_THROW(make_round_sphere(0, 1.0, FlowLaw::stationary()), InvalidArgument);
  // R^2 = 1 + 2 tau vanishes at tau = -1/2
  EXPECT_THROW(make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{-1.0, 0.0}}), InvalidArgument);
}

TEST(ModelTorus, PeriodicDistances) {
  auto t2 = make_flat_torus(2, 1.0, FlowLaw::stationary());
  EXPECT_NEAR(t2.distance(0.0, vec({0, 0}), vec({0.5, 0.5})), std::sqrt(2.0) / 2.0, 1e-12);
  auto t1 = make_flat_torus(1, 1.0, FlowLaw::stationary());
  EXPECT_NEAR(t1.distance(0.0, vec({0}), vec({0.75})), 0.25, 1e-12);
  EXPECT_EQ(t1.distance(0.0, vec({0.3}), vec({0.3})), 0.0);
  EXPECT_THROW(make_flat_torus(2, 0.0, FlowLaw::stationary()), InvalidArgument);
}

TEST(ModelTorus, StaticIsStatic) {
  auto t = make_flat_torus(2, 1.0, FlowLaw::stationary(), {{0.0, 1.0}});
  EXPECT_TRUE(t.is_static());
  EXPECT_EQ(t.distance(0.0, vec({0.1, 0.2}), vec({0.7, 0.9})), t.distance(0.7, vec({0.1, 0.2}), vec({0.7, 0.9})));
  EXPECT_EQ(t.scalar_curvature(0.3), 0.0);
}

TEST(BallMeasure, AnalyticValues) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::stationary());
  const Point x = vec({0, 0, 1});
  EXPECT_NEAR(ball_measure(s, 0.0, x, pi), 4.0 * pi, 1e-12);
  EXPECT_NEAR(ball_measure(s, 0.0, x, 1.0), cap_area_2sphere(1.0, 1.0), 1e-12);
  EXPECT_NEAR(ball_measure(s, 0.0, x, 1.0), 2.8884, 1e-4);
  auto t = make_flat_torus(2, 1.0, FlowLaw::stationary());
  EXPECT_NEAR(ball_measure(t, 0.0, vec({0.2, 0.2}), 0.1), pi * 0.01, 1e-14);
}

TEST(BallMeasure, MonotoneAndReachesTotalMass) {
  for (auto space : {make_round_sphere(2, 1.3, FlowLaw::stationary()), make_flat_torus(2, 1.0, FlowLaw::stationary()),
                     make_flat_torus(1, 2.0, FlowLaw::stationary()), make_round_sphere(3, 1.0, FlowLaw::stationary())}) {
    double prev = 0.0;
    for (int k = 0; k <= 200; ++k) {
      const double r = space.diameter(0.0) * k / 200.0;
      const double v = space.ball_volume(0.0, r);
      EXPECT_GE(v, prev - 1e-12) << space.label() << " r=" << r;
      prev = v;
    }
    EXPECT_NEAR(prev, space.total_volume(0.0), 1e-9 * space.total_volume(0.0)) << space.label();
  }
}

TEST(BallMeasure, TorusBallBeyondInjectivityMatchesMonteCarlo) {
  auto t = make_flat_torus(2, 1.0, FlowLaw::stationary());
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const double r = 0.6;
  int inside = 0;
  const int total = 400000;
  for (int k = 0; k < total; ++k) {
    const double a = u(rng), b = u(rng);
    if (a * a + b * b <= r * r) ++inside;
  }
  EXPECT_NEAR(t.ball_volume(0.0, r), double(inside) / total, 3e-3);
}

TEST(D2Derivative, StaticIsZero) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::stationary()).with_nodes(18);
  EXPECT_EQ(d2_time_derivative(s, 0.5, 0, 7, DerivativeSide::upper), 0.0);
}

TEST(D2Derivative, RicciBackwardSphereIsTwoThetaSquared) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::ricci_backward());
  const Point x = vec({1, 0, 0}), y = vec({std::cos(0.7), std::sin(0.7), 0});
  EXPECT_NEAR(d2_time_derivative(s, 0.0, x, y), 2.0 * 0.7 * 0.7, 1e-12);
  // ratio 2(n-1)/R(tau)^2 on random pairs
  std::mt19937_64 rng(3);
  for (int k = 0; k < 200; ++k) {
    const Point a = s.random_point(rng), b = s.random_point(rng);
    const double tau = 0.37;
    const double d = s.distance(tau, a, b);
    const double ratio = d2_time_derivative(s, tau, a, b) / (d * d);
    EXPECT_NEAR(ratio, 2.0 / (1.0 + 2.0 * tau), 1e-6);
  }
}

TEST(D2Derivative, SampledLadderMatchesAnalytic) {
  auto model = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 0.5}});
  auto sampled = sample(model, 60, 11, SamplingStrategy::uniform_random);
  const double tau = 0.2;
  for (std::size_t i = 0; i < 5; ++i) {
    const std::size_t j = 30 + i;
    const double exact = *sampled.exact_d2_rate(tau, i, j);
    const double up = d2_time_derivative(sampled, tau, i, j, DerivativeSide::upper);
    const double lo = d2_time_derivative(sampled, tau, i, j, DerivativeSide::lower);
    const double oracle = 2.0 * std::pow(angle(sampled.point(i), sampled.point(j)), 2);
    EXPECT_NEAR(exact, oracle, 1e-9);
    EXPECT_NEAR(up, oracle, 0.01 * oracle);
    EXPECT_NEAR(lo, oracle, 0.01 * oracle);
  }
}

TEST(D2Derivative, EndpointWithoutAdmissibleSideThrows) {
  auto model = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 0.5}});
  auto sampled = sample(model, 10, 1, SamplingStrategy::uniform_random);
  EXPECT_NO_THROW(d2_time_derivative(sampled, 0.0, 0, 1, DerivativeSide::upper));
  EXPECT_THROW(d2_time_derivative(sampled, 0.0, 0, 1, DerivativeSide::upper, {1.0, 0.9}), InvalidArgument);
}

TEST(ScalarCurvature, ModelValuesAndSampledRejection) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::stationary());
  EXPECT_DOUBLE_EQ(scalar_curvature(s, 0.0, vec({0, 0, 1})), 2.0);
  auto r = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 2.0}});
  EXPECT_NEAR(scalar_curvature(r, 1.5, vec({0, 0, 1})), 0.5, 1e-12);
  auto t = make_flat_torus(2, 1.0, FlowLaw::stationary());
  EXPECT_EQ(scalar_curvature(t, 0.0, vec({0.1, 0.1})), 0.0);
  auto sampled = sample(s, 20, 1, SamplingStrategy::uniform_random);
  EXPECT_THROW(scalar_curvature(sampled, 0.0, 0), UnsupportedOracle);
}

TEST(Sampling, TotalWeightMatchesVolume) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::stationary());
  auto ss = sample(s, 1000, 5, SamplingStrategy::uniform_random);
  EXPECT_NEAR(ss.total_mass(0.0), 4.0 * pi, 0.01 * 4.0 * pi);
  auto t = make_flat_torus(2, 1.0, FlowLaw::stationary());
  auto ts = sample(t, 100, 5, SamplingStrategy::quasi_uniform);
  EXPECT_NEAR(ts.total_mass(0.0), 1.0, 0.01);
  EXPECT_THROW(sample(t, 1, 5, SamplingStrategy::uniform_random), InvalidArgument);
}

TEST(Sampling, DeterministicGivenSeed) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::stationary());
  for (auto strategy : {SamplingStrategy::uniform_random, SamplingStrategy::quasi_uniform}) {
    auto a = sample(s, 50, 42, strategy), b = sample(s, 50, 42, strategy);
    EXPECT_EQ(a.points(), b.points());
    EXPECT_EQ(a.distance_matrix(0.0), b.distance_matrix(0.0));
  }
}

TEST(Sampling, SampledBallMeasureConverges) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::stationary());
  // per point on a quasi-uniform sample
  auto qs = sample(s, 4000, 2024, SamplingStrategy::quasi_uniform);
  for (double r : {0.2, 0.5, 1.0, 2.0})
    for (std::size_t i : {0u, 100u, 2000u}) {
      const double exact = cap_area_2sphere(1.0, r);
      EXPECT_NEAR(qs.ball_measure(0.0, i, r), exact, 0.05 * exact) << "r=" << r << " i=" << i;
    }
  // averaged over centers on a uniform-random sample
  auto us = sample(s, 4000, 2024, SamplingStrategy::uniform_random);
  for (double r : {0.2, 0.5, 1.0, 2.0}) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 4000; i += 20) mean += us.ball_measure(0.0, i, r) / 200.0;
    const double exact = cap_area_2sphere(1.0, r);
    EXPECT_NEAR(mean, exact, 0.05 * exact) << "r=" << r;
  }
}

TEST(Sampling, MetricAuditOnEverySlice) {
  auto model = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 0.3}});
  auto ss = sample(model, 80, 9, SamplingStrategy::quasi_uniform);
  for (double t : ss.time_grid()) {
    const auto audit = audit_metric(ss, t, 5000, 17);
    EXPECT_TRUE(audit.ok()) << audit.max_triangle_excess;
  }
  auto torus = make_flat_torus(2, 1.0, FlowLaw::stationary()).with_nodes(64);
  EXPECT_TRUE(audit_metric(torus, 0.0, 5000, 3).ok());
}

TEST(Sampling, InterpolatesSquaredDistancesBetweenSlices) {
  auto model = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 1.0}});
  auto ss = sample(model, 12, 4, SamplingStrategy::uniform_random, {{0.0, 1.0}});
  // d^2 is affine in tau under this flow, so interpolation is exact
  for (double tau : {0.25, 0.6})
    EXPECT_NEAR(ss.distance(tau, 2, 7), model.distance(tau, ss.point(2), ss.point(7)), 1e-12);
}

TEST(SampledSpace, ValidatesInputs) {
  auto base = std::make_shared<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(3, 3));
  (*base)(0, 1) = (*base)(1, 0) = 1.0;
  (*base)(0, 2) = (*base)(2, 0) = 1.0;
  Eigen::VectorXd w = Eigen::VectorXd::Ones(3);
  // points 1 and 2 coincide
  EXPECT_THROW(SampledSpace(1, {{0.0, base, 1.0, w}}, Orientation::backward, false), InvalidArgument);
  EXPECT_NO_THROW(SampledSpace(1, {{0.0, base, 1.0, w}}, Orientation::backward, true));
  auto asym = std::make_shared<Eigen::MatrixXd>(*base);
  (*asym)(1, 2) = 0.5;
  EXPECT_THROW(SampledSpace(1, {{0.0, asym, 1.0, w}}, Orientation::backward, true), InvalidArgument);
  Eigen::VectorXd neg = w;
  neg[0] = -1.0;
  EXPECT_THROW(SampledSpace(1, {{0.0, base, 1.0, neg}}, Orientation::backward, true), InvalidArgument);
  EXPECT_THROW(SampledSpace(1, {{1.0, base, 1.0, w}, {0.5, base, 1.0, w}}, Orientation::backward, true),
               InvalidArgument);
}

TEST(SampledSpace, JsonRoundTrip) {
  auto model = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 0.2}});
  auto ss = sample(model, 15, 8, SamplingStrategy::quasi_uniform, {{0.0, 0.1, 0.2}});
  const auto j = to_json(ss);
  auto back = sampled_space_from_json(j);
  EXPECT_EQ(back.size(), ss.size());
  for (double t : {0.0, 0.05, 0.2}) {
    EXPECT_TRUE(back.distance_matrix(t).isApprox(ss.distance_matrix(t), 1e-15));
    EXPECT_EQ(back.weights(t), ss.weights(t));
  }
  EXPECT_EQ(back.points(), ss.points());
  auto bad = j;
  bad["colour"] = "red";
  EXPECT_THROW(sampled_space_from_json(bad), InvalidArgument);
}

TEST(TimeReversal, ReversedModelMapsTimes) {
  auto model = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 0.5}});
  auto fwd = model.reversed_model(0.5);
  EXPECT_EQ(fwd.orientation(), Orientation::forward);
  EXPECT_NEAR(fwd.length(0.0), model.length(0.5), 1e-14);
  EXPECT_NEAR(fwd.length(0.5), model.length(0.0), 1e-14);
  EXPECT_NEAR(fwd.scale2_rate(0.1), -model.scale2_rate(0.4), 1e-14);
  EXPECT_NE(fwd.id(), model.id());
}

TEST(Nodes, GaussSphereLayout) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::stationary()).with_nodes(200);
  EXPECT_EQ(s.grid_lat(), 10);
  EXPECT_EQ(s.grid_lon(), 20);
  EXPECT_EQ(s.band_limit(), 9);
  EXPECT_NEAR(s.weights(0.0).sum(), 4.0 * pi, 1e-12);
  EXPECT_THROW(make_flat_torus(2, 1.0, FlowLaw::stationary()).with_nodes(63), InvalidArgument);
}
