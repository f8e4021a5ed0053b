#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "weakflow/propagators.hpp"

using namespace weakflow;
constexpr double pi = std::numbers::pi;

namespace {

ModelSpace circle(std::size_t n, FlowLaw law = FlowLaw::stationary(), ModelOptions o = {}) {
  return make_flat_torus(1, 1.0, std::move(law), o).with_nodes(n);
}

ScalarField cosine(const ModelSpace& s, double t) {
  Eigen::VectorXd v(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) v[i] = std::cos(2 * pi * s.node(i)[0]);
  return make_field(s, t, v);
}

// Periodic heat kernel on the unit circle, theta-series form.
double circle_kernel(double x, double t) {
  double s = 1.0;
  for (int k = 1; k < 200; ++k) s += 2.0 * std::exp(-4 * pi * pi * k * k * t) * std::cos(2 * pi * k * x);
  return s;
}

double sup_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Smooth positive field of harmonic degree <= 2 on the unit sphere.
ScalarField bump(const ModelSpace& s, double t, const Eigen::Vector3d& c) {
  Eigen::VectorXd v(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double z = s.node(i).dot(c);
    v[i] = (1.0 + z) * (1.0 + z) / 4.0 + 0.05;
  }
  return make_field(s, t, v);
}

}  // namespace

TEST(Schedule, RadiusLaws) {
  EXPECT_NEAR(chernoff_radius(OperatorKind::nu, 2, 0.1, 10), std::sqrt(8 * 0.01), 1e-15);
  EXPECT_NEAR(chernoff_radius(OperatorKind::sigma, 2, 0.1, 10), std::sqrt(4 * 0.01), 1e-15);
  EXPECT_NEAR(chernoff_radius(OperatorKind::beta, 2, 0.1, 10), std::sqrt(32 * 0.01), 1e-15);
  EXPECT_NEAR(chernoff_radius(OperatorKind::alpha, 2, 0.1, 10), std::sqrt(16 * 0.01), 1e-15);
  EXPECT_THROW(radius_constant(OperatorKind::eta, 2), InvalidArgument);
  EXPECT_THROW((ChernoffSchedule{0, 1}.validate()), InvalidArgument);
}

TEST(StaticHeat, ZeroTimeIsIdentity) {
  auto c = circle(64);
  const auto f = cosine(c, 0.0);
  const auto r = static_heat(c, 0.0, 0.3, 0.3, {1, 10}, f);
  EXPECT_EQ(r.field.values, f.values);
  EXPECT_EQ(r.stage_log.size(), 10u);
}

TEST(StaticHeat, CircleFourierDecay) {
  auto c = circle(256);
  const auto f = cosine(c, 0.0);
  const auto r = static_heat(c, 0.0, 0.0, 0.02, {1, 400}, f);
  EXPECT_LE(sup_diff(r.field.values, std::exp(-4 * pi * pi * 0.02) * f.values), 1e-2);
  EXPECT_EQ(r.stage_log.size(), 400u);
}

TEST(StaticHeat, ConstantsFixed) {
  auto c = circle(32);
  for (auto k : {OperatorKind::nu, OperatorKind::sigma}) {
    const auto r = static_heat(c, 0.0, 0.0, 0.1, {1, 50, ScheduleMode::double_limit, k}, constant_field(c, 0.0, 1.0));
    EXPECT_LT((r.field.values.array() - 1.0).abs().maxCoeff(), 1e-12);
  }
}

TEST(StaticHeat, KernelModesAgree) {
  auto c = circle(256);
  const auto f = cosine(c, 0.0);
  const auto a = static_heat(c, 0.0, 0.0, 0.02, {1, 400, ScheduleMode::double_limit, OperatorKind::nu}, f);
  const auto b = static_heat(c, 0.0, 0.0, 0.02, {1, 400, ScheduleMode::double_limit, OperatorKind::sigma}, f);
  EXPECT_LE(sup_diff(a.field.values, b.field.values), 2e-2);
}

TEST(StaticHeat, RejectsConjugateKernel) {
  auto c = circle(16);
  EXPECT_THROW(static_heat(c, 0.0, 0.0, 0.1, {1, 4, ScheduleMode::double_limit, OperatorKind::beta}, cosine(c, 0.0)),
               InvalidArgument);
}

TEST(DynamicHeat, StaticFlowReducesToStaticHeat) {
  auto c = circle(64, FlowLaw::stationary(), {{0.0, 1.0}, Orientation::forward});
  const auto f = cosine(c, 0.0);
  const auto dyn = dynamic_heat(c, 0.0, 0.05, {8, 16}, f);
  const auto st = static_heat(c, 0.0, 0.0, 0.05, {1, 128}, f);
  EXPECT_LT(sup_diff(dyn.field.values, st.field.values), 1e-12);
  EXPECT_EQ(dyn.stage_log.size(), 128u);
}

TEST(DynamicHeat, ConstantsOnShrinkingSphere) {
  auto model = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 0.2}}).with_nodes(72);
  const auto fwd = model.reversed_model(0.2);
  const auto r = dynamic_heat(fwd, 0.0, 0.2, {8, 8}, constant_field(fwd, 0.0, 1.0));
  EXPECT_LT((r.field.values.array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(DynamicHeat, ScaledCircleMatchesSeparableSolution) {
  auto c = circle(128, FlowLaw::linear_scale(1.0), {{0.0, 0.05}, Orientation::forward});
  const auto f = cosine(c, 0.0);
  const auto r = dynamic_heat(c, 0.0, 0.05, {64, 64}, f);
  const double integral = 1.0 - 1.0 / 1.05;  // int_0^0.05 (1 + t)^-2 dt
  EXPECT_LE(sup_diff(r.field.values, std::exp(-4 * pi * pi * integral) * f.values), 2e-2);
}

TEST(DynamicHeat, SingleLimitMode) {
  auto c = circle(128, FlowLaw::linear_scale(1.0), {{0.0, 0.05}, Orientation::forward});
  const auto f = cosine(c, 0.0);
  const auto r = dynamic_heat(c, 0.0, 0.05, {512, 1, ScheduleMode::single_limit}, f);
  EXPECT_EQ(r.stage_log.size(), 512u);
  EXPECT_LE(sup_diff(r.field.values, std::exp(-4 * pi * pi * (1.0 - 1.0 / 1.05)) * f.values), 2e-2);
}

TEST(DynamicHeat, EvolutionSystemLaw) {
  auto c = circle(128, FlowLaw::linear_scale(2.0), {{0.0, 0.06}, Orientation::forward});
  const auto f = cosine(c, 0.0);
  const auto whole = dynamic_heat(c, 0.0, 0.06, {32, 16}, f);
  const auto half = dynamic_heat(c, 0.0, 0.03, {16, 16}, f);
  const auto rest = dynamic_heat(c, 0.03, 0.06, {16, 16}, half.field);
  EXPECT_LE(sup_diff(whole.field.values, rest.field.values), 5e-3);
}

TEST(DynamicHeat, OrientationAndTagChecks) {
  auto backward = circle(16, FlowLaw::linear_scale(1.0), {{0.0, 0.1}, Orientation::backward});
  EXPECT_THROW(dynamic_heat(backward, 0.0, 0.1, {2, 2}, cosine(backward, 0.0)), InvalidArgument);
  auto fwd = circle(16, FlowLaw::linear_scale(1.0), {{0.0, 0.1}, Orientation::forward});
  EXPECT_THROW(dynamic_heat(fwd, 0.0, 0.1, {2, 2}, cosine(fwd, 0.05)), InvalidArgument);
  EXPECT_THROW(dynamic_heat(fwd, 0.1, 0.0, {2, 2}, cosine(fwd, 0.1)), InvalidArgument);
}

TEST(SampledPropagation, SupNormContractionAndPositivity) {
  auto model = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 0.1}});
  auto ss = sample(model, 300, 5, SamplingStrategy::quasi_uniform, {{0.0, 0.05, 0.1}});
  auto fwd = ss.reversed(0.1);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd v(ss.size());
  for (auto& x : v) x = u(rng);
  const auto heat = dynamic_heat(*fwd, 0.0, 0.1, {4, 4}, make_field(*fwd, 0.0, v));
  double prev = v.cwiseAbs().maxCoeff();
  for (const auto& s : heat.stage_log) {
    EXPECT_LE(s.sup_norm, prev + 1e-14);
    prev = s.sup_norm;
  }
  EXPECT_GE(heat.field.values.minCoeff(), 0.0);
  const auto st = static_heat(ss, 0.0, 0.0, 0.05, {1, 8}, make_field(ss, 0.0, v));
  EXPECT_GE(st.field.values.minCoeff(), 0.0);
  const auto conj = dynamic_conjugate(ss, 0.0, 0.1, {4, 4, ScheduleMode::double_limit, OperatorKind::beta},
                                      make_field(ss, 0.0, v));
  EXPECT_GE(conj.field.values.minCoeff(), 0.0);
  const auto sconj = static_conjugate(ss, 0.0, 0.0, 0.05, {1, 8, ScheduleMode::double_limit, OperatorKind::alpha},
                                      make_field(ss, 0.0, v));
  EXPECT_GE(sconj.field.values.minCoeff(), 0.0);
}

TEST(SampledPropagation, DeltaKeepsNonnegativity) {
  auto model = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 0.1}});
  auto ss = sample(model, 300, 6, SamplingStrategy::uniform_random, {{0.0, 0.05, 0.1}});
  const auto r = dynamic_conjugate(ss, 0.0, 0.1, {4, 8, ScheduleMode::double_limit, OperatorKind::beta},
                                   delta_density(ss, 0.0, 3));
  EXPECT_GE(r.field.values.minCoeff(), 0.0);
  EXPECT_GT(r.field.values.sum(), 0.0);
}

TEST(StaticConjugate, ZeroTimeIsIdentity) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::stationary()).with_nodes(72);
  const auto f = bump(s, 0.0, {0, 0, 1});
  const auto r = static_conjugate(s, 0.0, 0.2, 0.2, {1, 5, ScheduleMode::double_limit, OperatorKind::beta}, f);
  EXPECT_EQ(r.field.values, f.values);
}

TEST(StaticConjugate, FlatTorusMatchesHeat) {
  auto t = make_flat_torus(2, 1.0, FlowLaw::stationary()).with_nodes(256);
  Eigen::VectorXd v(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    v[i] = 0.6 * std::cos(2 * pi * t.node(i)[0]) + 0.4 * std::sin(2 * pi * t.node(i)[1]);
  const auto f = make_field(t, 0.0, v);
  const auto conj = static_conjugate(t, 0.0, 0.0, 0.02, {1, 400, ScheduleMode::double_limit, OperatorKind::beta}, f);
  const auto heat = static_heat(t, 0.0, 0.0, 0.02, {1, 400}, f);
  EXPECT_LE(sup_diff(conj.field.values, heat.field.values), 1e-3);
}

TEST(StaticConjugate, ConstantsDecayWithScalarCurvature) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::stationary()).with_nodes(200);
  const auto r = static_conjugate(s, 0.0, 0.0, 0.05, {1, 400, ScheduleMode::double_limit, OperatorKind::beta},
                                  constant_field(s, 0.0, 1.0));
  EXPECT_LE((r.field.values.array() - std::exp(-0.1)).abs().maxCoeff(), 1e-2);
}

TEST(DynamicConjugate, StaticFlatTorusReducesToStaticConjugate) {
  auto t = make_flat_torus(2, 1.0, FlowLaw::stationary()).with_nodes(64);
  Eigen::VectorXd v(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) v[i] = std::sin(2 * pi * t.node(i)[0]);
  const auto f = make_field(t, 0.0, v);
  const ChernoffSchedule s{4, 25, ScheduleMode::double_limit, OperatorKind::beta};
  const auto dyn = dynamic_conjugate(t, 0.0, 0.04, s, f);
  const auto st = static_conjugate(t, 0.0, 0.0, 0.04, {1, 100, ScheduleMode::double_limit, OperatorKind::beta}, f);
  EXPECT_LT(sup_diff(dyn.field.values, st.field.values), 1e-12);
}

TEST(DynamicConjugate, ShrinkingSphereConstantsFollowScalarCurvature) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 0.1}}).with_nodes(200);
  const auto r = dynamic_conjugate(s, 0.0, 0.1, {64, 64, ScheduleMode::double_limit, OperatorKind::beta},
                                   constant_field(s, 0.0, 1.0));
  EXPECT_LE((r.field.values.array() - 1.0 / 1.2).abs().maxCoeff(), 2e-2);
}

TEST(DynamicConjugate, MassConservationOnRicciFlow) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 0.1}}).with_nodes(200);
  auto u = bump(s, 0.0, {0.3, -0.2, 0.9});
  const double m0 = u.values.dot(s.weights(0.0));
  for (int k = 0; k < 5; ++k) {
    const double a = 0.02 * k, b = 0.02 * (k + 1);
    u = dynamic_conjugate(s, a, b, {8, 16, ScheduleMode::double_limit, OperatorKind::beta}, u).field;
    EXPECT_NEAR(u.values.dot(s.weights(b)), m0, 0.01 * m0) << "tau=" << b;
  }
}

TEST(DynamicConjugate, SupNormContractionOnSmoothField) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 0.1}}).with_nodes(200);
  const auto f = bump(s, 0.0, {0, 1, 0});
  const auto r = dynamic_conjugate(s, 0.0, 0.1, {16, 16, ScheduleMode::double_limit, OperatorKind::beta}, f);
  EXPECT_LE(r.field.values.cwiseAbs().maxCoeff(), f.values.cwiseAbs().maxCoeff());
}

TEST(DynamicConjugate, WarnsWithoutPscFlag) {
  auto base = std::make_shared<Eigen::MatrixXd>(2, 2);
  *base << 0, 1, 1, 0;
  SampledSpace s(1, {{0.0, base, 1.0, Eigen::VectorXd::Ones(2)}}, Orientation::backward, false);
  WarningCapture cap;
  static_conjugate(s, 0.0, 0.0, 0.01, {1, 1, ScheduleMode::double_limit, OperatorKind::beta},
                   constant_field(s, 0.0, 1.0));
  EXPECT_FALSE(cap.messages().empty());
}

TEST(HeatKernel, ZeroTimeIsDelta) {
  auto c = circle(32);
  const auto k = heat_kernel(c, 0.0, 0.0, 5, {1, 4});
  EXPECT_DOUBLE_EQ(k.values[5], 32.0);
  EXPECT_DOUBLE_EQ(k.values.sum(), 32.0);
}

TEST(HeatKernel, CircleThetaSeries) {
  auto c = circle(256);
  const std::size_t y = 40;
  const auto k = heat_kernel(c, 0.0, 0.05, y, {1, 400});
  double err = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    err = std::max(err, std::abs(k.values[i] - circle_kernel(c.node(i)[0] - c.node(y)[0], 0.05)));
  EXPECT_LE(err, 2e-2);
  EXPECT_NEAR(k.values.dot(c.weights(0.0)), 1.0, 1e-6);
}

TEST(Duality, ZeroElapsedGapVanishes) {
  auto t = make_flat_torus(2, 1.0, FlowLaw::stationary()).with_nodes(64);
  Eigen::VectorXd v(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) v[i] = std::cos(2 * pi * t.node(i)[0]);
  EXPECT_LT(duality_gap(t, 0.3, 0.3, make_field(t, 0.3, v), 3, ChernoffSchedule{4, 4}), 1e-12);
}

TEST(Duality, StaticFlatTorus) {
  auto t = make_flat_torus(2, 1.0, FlowLaw::stationary()).with_nodes(64);
  Eigen::VectorXd v(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    v[i] = std::cos(2 * pi * t.node(i)[0]) + 0.5 * std::sin(2 * pi * (t.node(i)[0] + t.node(i)[1]));
  const auto g = make_field(t, 0.0, v);
  for (std::size_t y : {0u, 9u, 37u}) EXPECT_LE(duality_gap(t, 0.0, 0.05, g, y, ChernoffSchedule{32, 32}), 5e-3);
}

TEST(Duality, ShrinkingSphereRefines) {
  auto s = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), {{0.0, 0.05}}).with_nodes(200);
  const auto g = bump(s, 0.0, {0.6, 0.0, 0.8});
  const double coarse = duality_gap(s, 0.0, 0.05, g, 17, ChernoffSchedule{8, 8});
  const double fine = duality_gap(s, 0.0, 0.05, g, 17, ChernoffSchedule{16, 16});
  EXPECT_LE(fine, 2e-2);
  EXPECT_LT(fine, coarse);
}

TEST(Refinement, StopsWhenConverged) {
  auto c = circle(64);
  const auto f = cosine(c, 0.0);
  auto run = [&](const ChernoffSchedule& s) { return static_heat(c, 0.0, 0.0, 0.02, s, f); };
  const auto study = refine(run, {1, 25}, 1e-3, 6);
  ASSERT_GE(study.rows.size(), 2u);
  EXPECT_TRUE(study.converged);
  EXPECT_TRUE(std::isnan(study.rows.front().sup_change));
  EXPECT_LT(study.rows.back().sup_change, 1e-3);
  ASSERT_TRUE(study.final.converged_estimate.has_value());
  // the Richardson estimate is closer to the exact decay than the last field
  const Eigen::VectorXd exact = std::exp(-4 * pi * pi * 0.02) * f.values;
  EXPECT_LT(sup_diff(*study.final.converged_estimate, exact), sup_diff(study.final.field.values, exact));
  const auto csv = refinement_csv(study);
  EXPECT_EQ(csv.rfind("m,j,sup_change,wall_time\n", 0), 0u);
}

TEST(Refinement, ErrorDecreasesAsInnerStagesDouble) {
  auto c = circle(256);
  const auto f = cosine(c, 0.0);
  const Eigen::VectorXd exact = std::exp(-4 * pi * pi * 0.02) * f.values;
  double prev = std::numeric_limits<double>::infinity();
  for (int j : {25, 50, 100, 200, 400}) {
    const double err = sup_diff(static_heat(c, 0.0, 0.0, 0.02, {1, j}, f).field.values, exact);
    EXPECT_LE(err, prev * 1.2) << j;
    prev = err;
  }
}
