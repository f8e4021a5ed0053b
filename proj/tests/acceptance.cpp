#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "weakflow/weakflow.hpp"

using namespace weakflow;

namespace {

struct Outcome {
  bool ok = false;
  std::string summary;
};

const json& case_named(const ScenarioResult& r, const std::string& name) {
  for (const auto& c : r.report["cases"])
    if (c["name"] == name) return c;
  throw Error("missing case " + name);
}

double check_value(const json& c, const std::string& name) {
  for (const auto& ch : c["checks"])
    if (ch["name"] == name) return ch["value"].get<double>();
  throw Error("missing check " + name);
}

std::string g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

ScenarioResult run_named(const std::string& name) { return run_scenario(parse_scenario(*catalogue_scenario(name))); }

Outcome verdict_only(const ScenarioResult& r) {
  return {r.exit_code == 0, "exit " + std::to_string(r.exit_code) + (r.error ? " " + r.report.value("error", "") : "")};
}

Outcome c1() {
  const auto r = run_named("expansion-coefficients");
  auto o = verdict_only(r);
  o.summary += "; c2 theta " + g(check_value(case_named(r, "sphere-theta"), "c2")) + " eta " +
               g(check_value(case_named(r, "sphere-eta"), "c2")) + " beta " +
               g(check_value(case_named(r, "sphere-beta"), "c2")) + " torus nu " +
               g(check_value(case_named(r, "torus-nu-cosine"), "c2"));
  return o;
}

Outcome c2() {
  const auto r = run_named("circle-heat-convergence");
  auto o = verdict_only(r);
  const auto& c = r.report["cases"][0];
  o.summary += "; sup error at j=400 " + g(check_value(c, "final_sup_error")) + ", worst ratio per doubling " +
               g(check_value(c, "max_error_ratio_per_doubling"));
  return o;
}

Outcome c3() {
  const auto r = run_named("sphere-conjugate-decay");
  auto o = verdict_only(r);
  const auto& d = r.report["cases"][0]["details"];
  o.summary += "; u in [" + g(d["final_min"]) + ", " + g(d["final_max"]) + "] vs " + g(d["reference_final"]) +
               ", max sup error " + g(d["max_sup_error"]) + ", mass drift " + g(d["max_mass_drift"]);
  return o;
}

Outcome c4() {
  const auto r = run_named("duality-residual");
  auto o = verdict_only(r);
  const auto& s = case_named(r, "shrinking-sphere")["details"]["gaps"];
  o.summary += "; torus gap " + g(check_value(case_named(r, "static-torus"), "final_gap")) + ", sphere gaps " + g(s[0]) +
               " -> " + g(s[1]);
  return o;
}

Outcome c5() {
  const auto r = run_named("sphere-trace-formula");
  auto o = verdict_only(r);
  const auto& a = case_named(r, "analytic")["details"];
  const auto& s = case_named(r, "sampled")["details"];
  o.summary += "; analytic ball " + g(a["ball"]["mean"]) + " sphere " + g(a["sphere"]["mean"]) + ", sampled ball " +
               g(s["ball"]["mean"]) + " sphere " + g(s["sphere"]["mean"]);
  return o;
}

Outcome c6() {
  const auto r = run_named("sphere-ricci-saturation");
  auto o = verdict_only(r);
  for (const char* n : {"shrinking-sphere", "static-sphere", "static-torus"}) {
    const auto& c = case_named(r, n);
    o.summary += std::string("; ") + n + " " + c["verdict"].get<std::string>() + " defect " + g(check_value(c, "defect"));
  }
  return o;
}

Outcome c7() {
  const auto r = run_named("wsrf-monotonicity");
  auto o = verdict_only(r);
  const auto& bad = case_named(r, "expanding-circle");
  const bool witness = !bad["reports"][0]["witnesses"].empty();
  o.ok = o.ok && witness;
  o.summary += "; static sphere " + case_named(r, "static-sphere")["verdict"].get<std::string>() + ", static torus " +
               case_named(r, "static-torus")["verdict"].get<std::string>() + ", expanding " +
               bad["verdict"].get<std::string>() + (witness ? " with witness" : " WITHOUT witness");
  return o;
}

Outcome c8() {
  const auto r = run_named("coupled-contraction");
  auto o = verdict_only(r);
  const auto& reps = r.report["cases"][0]["reports"];
  bool five = true, jensen = false;
  for (const auto& rep : reps) {
    if (rep["check"] == "coupled-contraction") five = five && rep["series"].size() == 5;
    if (rep["check"] == "jensen-audit")
      jensen = rep["verdict"] == "pass" && rep["details"]["pairs"] == 100;
  }
  o.ok = o.ok && five && jensen;
  o.summary += std::string("; ") + std::to_string(reps.size() - 1) + " costs over 5 slices" + (five ? "" : " (slice count wrong)") +
               ", Jensen audit on 100 pairs " + (jensen ? "pass" : "FAIL");
  return o;
}

Outcome c9() {
  const auto r = run_named("convex-cost-crosscheck");
  auto o = verdict_only(r);
  const auto& d = r.report["cases"][0]["reports"][0]["details"];
  const auto premises = d["premises"].get<int>();
  o.ok = o.ok && premises > 0;
  o.summary += "; " + std::to_string(premises) + " contracting (flow, cost) pairs, all pass WSRF";
  return o;
}

Outcome c10() {
  const auto r = run_named("sampled-determinism");
  auto o = verdict_only(r);
  o.summary += "; " + std::to_string(r.report["cases"][0]["details"].size()) + " scenarios rerun with identical data.csv";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "expansion coefficients", 60, c1},       {2, "static heat convergence", 60, c2},
      {3, "conjugate propagator decay", 120, c3},  {4, "duality gap", 120, c4},
      {5, "trace formula", 120, c5},               {6, "saturation classification", 180, c6},
      {7, "WSRF monotonicity", 120, c7},           {8, "coupled contraction", 180, c8},
      {9, "convex-cost cross-check", 300, c9},     {10, "determinism", 600, c10},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs <= c.budget_seconds;
    const bool ok = o.ok && in_budget;
    failures += ok ? 0 : 1;
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title << "): " << o.summary << " ["
              << g(secs) << " s of " << c.budget_seconds << " s" << (in_budget ? "" : ", OVER BUDGET") << "]"
              << std::endl;
  }
  std::cout << (failures == 0 ? "all 10 criteria pass" : std::to_string(failures) + " criteria fail") << std::endl;
  return failures == 0 ? 0 : 1;
}
