#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "weakflow/scenario.hpp"

using namespace weakflow;

namespace {

constexpr double pi = std::numbers::pi;

json base(json space, json task) {
  return {{"schema", "weakflow.scenario/1"}, {"name", "t"}, {"seed", 3}, {"space", space}, {"task", task}};
}

std::string parse_error(const json& j) {
  try {
    validate_scenario(parse_scenario(j));
  } catch (const InvalidArgument& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const json unit_sphere = {{"model", "round-sphere"}, {"n", 2}};

}  // namespace

// --- hashing ---------------------------------------------------------------

TEST(Hash, FnvReferenceVectors) {
  EXPECT_EQ(fnv1a(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a("foobar"), "85944171f73967e8");
}

// --- fields ----------------------------------------------------------------

TEST(Fields, BumpDecompositionMatchesDirectFormula) {
  const auto s = make_round_sphere(2, 1.0, FlowLaw::stationary());
  const auto f = parse_field(json{{"kind", "bump"}, {"center", {0, 0, 2}}, {"offset", 0.1}}, s, 1);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 20; ++k) {
    const Point x = s.random_point(rng);
    EXPECT_NEAR(f(x), (1 + x[2]) * (1 + x[2]) / 4 + 0.1, 1e-12);
  }
  EXPECT_TRUE(f.known_positive());
}

TEST(Fields, SphereModesDecayWithTheirEigenvalues) {
  // On the unit 2-sphere x_3 has eigenvalue 2 and x_1 x_2 has eigenvalue 6.
  const auto s = make_round_sphere(2, 1.0, FlowLaw::stationary());
  const auto f = parse_field(
      json{{"kind", "harmonic"}, {"constant", 0.5}, {"linear", {0, 0, 1}}, {"quadratic", {{0, 1, 0}, {1, 0, 0}, {0, 0, 0}}}},
      s, 1);
  const Point x = s.normalize(Point(Eigen::Vector3d(0.3, -0.5, 0.8)));
  const double t = 0.07;
  EXPECT_NEAR(f.decayed(x, t), 0.5 + std::exp(-2 * t) * x[2] + std::exp(-6 * t) * x[0] * x[1], 1e-12);
}

TEST(Fields, TraceOfQuadraticIsConstant) {
  // |x|^2 = 1 on the sphere, so the identity quadratic is a constant mode.
  const auto s = make_round_sphere(2, 1.0, FlowLaw::stationary());
  const auto f = parse_field(json{{"kind", "harmonic"}, {"quadratic", {{2, 0, 0}, {0, 2, 0}, {0, 0, 2}}}}, s, 1);
  EXPECT_TRUE(f.is_constant());
  EXPECT_NEAR(f(s.normalize(Point(Eigen::Vector3d(1, 2, 3)))), 1.0, 1e-12);
}

TEST(Fields, TorusModeEigenvaluesScaleWithSide) {
  const auto t = make_flat_torus(2, 2.0, FlowLaw::stationary());
  const auto f = parse_field(json{{"kind", "fourier"}, {"terms", {{{"k", {1, 1}}, {"cos", 1.0}}}}}, t, 1);
  ASSERT_EQ(f.terms().size(), 1u);
  EXPECT_NEAR(f.terms()[0].eigenvalue, 4 * pi * pi * 2 / 4.0, 1e-12);
  const Point x(Eigen::Vector2d(0.1, 0.3));
  EXPECT_NEAR(f(x), std::cos(2 * pi * 0.4), 1e-12);
}

TEST(Fields, RandomSmoothIsSeeded) {
  const auto t = make_flat_torus(2, 1.0, FlowLaw::stationary());
  const auto a = parse_field(json{{"kind", "random-smooth"}}, t, 5);
  const auto b = parse_field(json{{"kind", "random-smooth"}}, t, 5);
  const auto c = parse_field(json{{"kind", "random-smooth"}}, t, 6);
  EXPECT_EQ(a.terms().size(), 4u);
  const Point x(Eigen::Vector2d(0.2, 0.7));
  EXPECT_EQ(a(x), b(x));
  EXPECT_NE(a(x), c(x));
}

TEST(Fields, ExactHeatOnScaledCircle) {
  // scale2 = (1 + t)^2 so the integral of 1/scale2 over [0, 0.5] is 1/3.
  const auto c = make_flat_torus(1, 1.0, FlowLaw::linear_scale(1.0), ModelOptions{{0, 1}, Orientation::forward})
                     .with_nodes(32);
  const auto f = parse_field(json{{"kind", "cosine"}, {"axis", 0}}, c, 1);
  const auto u = exact_heat(f, c, c, 0.0, 0.5);
  for (std::size_t i = 0; i < c.size(); ++i)
    EXPECT_NEAR(u.values[i], std::exp(-4 * pi * pi / 3) * std::cos(2 * pi * c.node(i)[0]), 1e-10);
}

TEST(Fields, ExactConjugateConstantOnShrinkingSphere) {
  // scal = 2 / (1 + 2 tau) on the unit 2-sphere, so c * exp(-int scal) = c / (1 + 2 tau).
  const auto s = make_round_sphere(2, 1.0, FlowLaw::ricci_backward(), ModelOptions{{0, 0.1}});
  EXPECT_NEAR(exact_conjugate_constant(3.0, s, 0.0, 0.1), 3.0 / 1.2, 1e-10);
}

TEST(Fields, ErrorsNameTheField) {
  const auto s = make_round_sphere(2, 1.0, FlowLaw::stationary());
  EXPECT_THROW(parse_field(json{{"kind", "cosine"}}, s, 1), InvalidArgument);
  EXPECT_THROW(parse_field(json{{"kind", "bump"}, {"center", {0, 0}}}, s, 1), InvalidArgument);
  try {
    parse_field(json{{"kind", "harmonic"}, {"bogus", 1}}, s, 1, "task.field");
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("task.field.bogus"), std::string::npos);
  }
}

// --- config validation -------------------------------------------------------------

TEST(Config, NegativeSampleCountNamesTheField) {
  const auto err = parse_error(base({{"model", "round-sphere"}, {"backend", "sampled"}, {"samples", {{"N", -5}}}},
                                    {{"kind", "trace"}}));
  EXPECT_NE(err.find("config.space.samples.N"), std::string::npos) << err;
}

TEST(Config, RejectsUnknownKeysEverywhere) {
  EXPECT_NE(parse_error(json{{"schema", "weakflow.scenario/1"}, {"name", "t"}, {"extra", 1}}).find("config.extra"),
            std::string::npos);
  EXPECT_NE(parse_error(base({{"model", "flat-torus"}, {"colour", 1}}, {{"kind", "trace"}})).find("config.space.colour"),
            std::string::npos);
  const auto j = base({{"model", "flat-torus"}, {"n", 1}, {"backend", "nodes"}, {"nodes", 8}},
                      {{"kind", "wsrf"}, {"field", 1}, {"time_grid", {0, 0.1}}, {"speed", 2}});
  const auto res = run_scenario(parse_scenario(j));
  EXPECT_EQ(res.exit_code, 1);
  EXPECT_NE(res.report["error"].get<std::string>().find("config.task.speed"), std::string::npos);
}

TEST(Config, StructuralErrors) {
  EXPECT_NE(parse_error(json{{"schema", "other/1"}, {"name", "t"}}).find("config.schema"), std::string::npos);
  EXPECT_NE(parse_error(base(unit_sphere, {{"kind", "dance"}})).find("config.task.kind"), std::string::npos);
  EXPECT_NE(parse_error(base({{"model", "cube"}}, {{"kind", "trace"}})).find("config.space.model"), std::string::npos);
  EXPECT_NE(parse_error(base({{"model", "flat-torus"}, {"interval", {1, 0}}}, {{"kind", "trace"}}))
                .find("config.space.interval"),
            std::string::npos);
  EXPECT_NE(parse_error(base({{"model", "flat-torus"}, {"size", -1}}, {{"kind", "trace"}})).find("config.space.size"),
            std::string::npos);
  EXPECT_NE(parse_error(base({{"model", "flat-torus"}, {"backend", "nodes"}, {"nodes", 7}}, {{"kind", "trace"}}))
                .find("config.space.nodes"),
            std::string::npos);
  auto dup = json{{"schema", "weakflow.scenario/1"},
                  {"name", "t"},
                  {"cases", {{{"name", "a"}, {"space", unit_sphere}, {"task", {{"kind", "trace"}}}},
                             {{"name", "a"}, {"space", unit_sphere}, {"task", {{"kind", "trace"}}}}}}};
  EXPECT_NE(parse_error(dup).find("duplicate"), std::string::npos);
  auto both = base(unit_sphere, {{"kind", "trace"}});
  both["cases"] = json::array();
  EXPECT_NE(parse_error(both).find("either"), std::string::npos);
  auto expect = base(unit_sphere, {{"kind", "trace"}});
  expect["expect"] = "maybe";
  EXPECT_NE(parse_error(expect).find("config.expect"), std::string::npos);
}

TEST(Config, ValidationReachesFieldsCostsAndSchedules) {
  EXPECT_NE(parse_error(base(unit_sphere, {{"kind", "expansion-study"}, {"operator", "nu"}, {"field", {{"kind", "cosine"}}}}))
                .find("config.cases[0].task.field"),
            std::string::npos);
  const json circle = {{"model", "flat-torus"}, {"n", 1}, {"backend", "sampled"}, {"samples", {{"N", 16}}}};
  EXPECT_NE(parse_error(base(circle, {{"kind", "contraction"}, {"costs", {"d^3"}}})).find("costs[0]"), std::string::npos);
  EXPECT_NE(parse_error(base(circle, {{"kind", "contraction"}, {"costs", {{{"polynomial", {-1.0}}}}}}))
                .find("costs[0]"),
            std::string::npos);
  EXPECT_NE(parse_error(base(circle, {{"kind", "wsrf"}, {"m", 0}})).find(".task.m"), std::string::npos);
}

TEST(Config, NonPositiveTolerancesRejected) {
  const auto j = base(unit_sphere, {{"kind", "trace"}, {"rel_tol", 0}});
  const auto res = run_scenario(parse_scenario(j));
  EXPECT_EQ(res.exit_code, 1);
  EXPECT_NE(res.report["error"].get<std::string>().find("config.task.rel_tol"), std::string::npos);
}

// --- running -----------------------------------------------------------------------

TEST(Run, ShrinkingSphereSaturationPasses) {
  const auto res = run_scenario(parse_scenario(
      base({{"model", "round-sphere"}, {"flow", "ricci-backward"}}, {{"kind", "saturation"}})));
  EXPECT_EQ(res.exit_code, 0);
  const auto& series = res.report["cases"][0]["reports"][0]["series"];
  ASSERT_FALSE(series.empty());
  EXPECT_NEAR(series[0]["value"].get<double>(), 0.0, 0.05);
}

TEST(Run, StaticSphereSaturationFailsWithWitnesses) {
  const auto res = run_scenario(parse_scenario(base(unit_sphere, {{"kind", "saturation"}})));
  EXPECT_EQ(res.exit_code, 2);
  EXPECT_EQ(res.report["verdict"], "fail");
  EXPECT_FALSE(res.report["cases"][0]["reports"][0]["witnesses"].empty());
  EXPECT_EQ(res.witnesses_csv.rfind("check,time,points,value,note\n", 0), 0u);
}

TEST(Run, ExpectedFailureCountsAsPass) {
  auto j = base(unit_sphere, {{"kind", "saturation"}});
  j["expect"] = "fail";
  EXPECT_EQ(run_scenario(parse_scenario(j)).exit_code, 0);
  j["expect"] = "inconclusive";
  EXPECT_EQ(run_scenario(parse_scenario(j)).exit_code, 2);
}

TEST(Run, SparseSampleIsInconclusive) {
  const auto j = base({{"model", "round-sphere"}, {"backend", "sampled"},
                       {"samples", {{"N", 40}, {"strategy", "uniform-random"}}}},
                      {{"kind", "saturation"}});
  const auto res = run_scenario(parse_scenario(j));
  EXPECT_EQ(res.exit_code, 3);
  EXPECT_EQ(res.report["verdict"], "inconclusive");
}

TEST(Run, RuntimeErrorsAreRecorded) {
  const auto j = base({{"model", "flat-torus"}, {"backend", "nodes"}, {"nodes", 16}},
                      {{"kind", "duality"}, {"field", 1}, {"y", 99}, {"tau", 0.1}, {"schedules", {{2, 2}}}});
  const auto res = run_scenario(parse_scenario(j));
  EXPECT_EQ(res.exit_code, 1);
  EXPECT_TRUE(res.error);
  EXPECT_EQ(res.report["verdict"], "error");
  EXPECT_NE(res.report["error"].get<std::string>().find("config.task.y"), std::string::npos);
  EXPECT_TRUE(res.report["cases"][0].contains("error"));
}

TEST(Run, NumericChecksDriveVerdicts) {
  auto task = json{{"kind", "expansion-study"}, {"operator", "theta"}, {"field", 1}, {"point", {0, 0, 1}},
                   {"expect_c2", -1.0 / 6.0}};
  EXPECT_EQ(run_scenario(parse_scenario(base(unit_sphere, task))).exit_code, 0);
  task["expect_c2"] = -0.5;
  const auto res = run_scenario(parse_scenario(base(unit_sphere, task)));
  EXPECT_EQ(res.exit_code, 2);
  EXPECT_FALSE(res.report["cases"][0]["checks"][0]["ok"].get<bool>());
}

TEST(Run, DynamicHeatOnScaledCircleConverges) {
  const json space = {{"model", "flat-torus"}, {"n", 1}, {"flow", {{"law", "linear"}, {"rate", 1.0}}},
                      {"orientation", "forward"}, {"backend", "nodes"}, {"nodes", 128}};
  const json task = {{"kind", "heat-convergence"}, {"propagation", "dynamic"}, {"field", {{"kind", "cosine"}, {"axis", 0}}},
                     {"elapsed", 0.02}, {"m", 8}, {"j_ladder", {4, 8, 16, 32}}, {"max_error", 1e-2}};
  const auto res = run_scenario(parse_scenario(base(space, task)));
  EXPECT_EQ(res.exit_code, 0) << res.report.dump(2);
}

TEST(Run, RefinementTableWhenRequested) {
  const json space = {{"model", "round-sphere"}, {"flow", "ricci-backward"}, {"interval", {0, 0.05}},
                      {"backend", "nodes"}, {"nodes", 98}};
  const json task = {{"kind", "conjugate-convergence"}, {"field", 1}, {"m", 2}, {"j", 2}, {"refine_tol", 1e-3},
                     {"max_doublings", 2}};
  const auto res = run_scenario(parse_scenario(base(space, task)));
  EXPECT_EQ(res.refinement_csv.rfind("case,m,j,sup_change,wall_time\n", 0), 0u) << res.refinement_csv;
  EXPECT_GE(std::count(res.refinement_csv.begin(), res.refinement_csv.end(), '\n'), 3);
}

TEST(Run, SeedOverrideAndDeterminism) {
  const json space = {{"model", "flat-torus"}, {"n", 1}, {"backend", "sampled"},
                      {"samples", {{"N", 32}, {"strategy", "uniform-random"}}}};
  const json task = {{"kind", "contraction"}, {"inits", {{{"delta", 1}}, {{"delta", 9}}}}, {"costs", {"d"}},
                     {"tau_grid", {0, 0.01, 0.02}}, {"m", 2}, {"j", 2}};
  const auto sc = parse_scenario(base(space, task));
  const auto a = run_scenario(sc);
  const auto b = run_scenario(sc);
  const auto c = run_scenario(sc, {std::uint64_t{11}});
  EXPECT_EQ(a.data_csv, b.data_csv);
  EXPECT_NE(a.data_csv, c.data_csv);
  EXPECT_EQ(a.config_hash, b.config_hash);
  EXPECT_NE(a.config_hash, c.config_hash);
  EXPECT_EQ(c.report["seed"], 11);
}

TEST(Run, DataCsvIsLongFormat) {
  const auto res = run_scenario(parse_scenario(
      base(unit_sphere, {{"kind", "expansion-study"}, {"operator", "eta"}, {"field", 1}, {"ladder", {0.2, 0.1, 0.05, 0.025}}})));
  std::istringstream in(res.data_csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "case,series,x,value");
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3) << line;
    EXPECT_EQ(line.rfind("t,eta(constant),", 0), 0u) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 4);
  EXPECT_EQ(res.data_csv.find('\r'), std::string::npos);
}

TEST(Outputs, ManifestHashesMatchFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "weakflow_test_outputs";
  std::filesystem::remove_all(dir);
  const auto res = run_scenario(parse_scenario(base(unit_sphere, {{"kind", "saturation"}})));
  write_outputs(res, dir);
  const auto manifest = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["schema"], "weakflow.manifest/1");
  EXPECT_EQ(manifest["config_hash"], "fnv1a64:" + res.config_hash);
  for (const char* f : {"report.json", "data.csv", "witnesses.csv"}) {
    ASSERT_TRUE(std::filesystem::exists(dir / f)) << f;
    EXPECT_EQ(manifest["files"][f], "fnv1a64:" + fnv1a(slurp(dir / f)));
  }
  EXPECT_FALSE(std::filesystem::exists(dir / "refinement.csv"));
  const auto report = json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(report["schema"], "weakflow.report/1");
  EXPECT_TRUE(report["warnings"].is_array());
  std::filesystem::remove_all(dir);
}

TEST(Outputs, WarningsAreCaptured) {
  // A tiny heat step on a sparse sample leaves each ball with only its center.
  const json space = {{"model", "flat-torus"}, {"n", 1}, {"backend", "sampled"}, {"samples", {{"N", 16}}}};
  const json task = {{"kind", "heat-convergence"}, {"field", {{"kind", "cosine"}, {"axis", 0}}}, {"elapsed", 1e-8},
                     {"j_ladder", {1}}};
  const auto res = run_scenario(parse_scenario(base(space, task)));
  EXPECT_EQ(res.exit_code, 0) << res.report.dump(2);
  EXPECT_FALSE(res.warnings.empty());
  EXPECT_EQ(res.report["warnings"].size(), res.warnings.size());
}

// --- catalogue -------------------------------------------------------------------

TEST(Catalogue, OneScenarioPerCriterionAllValid) {
  ASSERT_EQ(catalogue().size(), 10u);
  std::set<std::string> names;
  for (const auto& e : catalogue()) {
    const auto j = catalogue_scenario(e.name);
    ASSERT_TRUE(j.has_value());
    const auto sc = parse_scenario(*j);
    EXPECT_EQ(sc.name, e.name);
    EXPECT_FALSE(sc.description.empty());
    EXPECT_NO_THROW(validate_scenario(sc)) << e.name;
    names.insert(e.name);
  }
  EXPECT_EQ(names.size(), 10u);
  EXPECT_TRUE(names.count("sphere-ricci-saturation"));
  EXPECT_FALSE(catalogue_scenario("nope").has_value());
}

TEST(Catalogue, CheapScenariosPass) {
  for (const char* name : {"expansion-coefficients", "duality-residual", "sphere-ricci-saturation"}) {
    const auto res = run_scenario(parse_scenario(*catalogue_scenario(name)));
    EXPECT_EQ(res.exit_code, 0) << name << res.report.dump(2);
  }
}

TEST(Catalogue, DeterminismRejectsNesting) {
  auto j = *catalogue_scenario("sampled-determinism");
  j["task"]["scenarios"] = {"sampled-determinism"};
  EXPECT_EQ(run_scenario(parse_scenario(j)).exit_code, 1);
}
