#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace weakflow {

struct CatalogueEntry {
  const char* name;
  const char* text;  // scenario JSON
};

// Bundled acceptance suite, one scenario per criterion.
inline const std::vector<CatalogueEntry>& catalogue() {
  static const std::vector<CatalogueEntry> entries{
      {"expansion-coefficients", R"({
  "schema": "weakflow.scenario/1",
  "name": "expansion-coefficients",
  "description": "Small-radius r^2 coefficients of the averaging operators on the unit 2-sphere and the unit 2-torus",
  "seed": 1,
  "cases": [
    {"name": "sphere-theta", "space": {"model": "round-sphere", "n": 2},
     "task": {"kind": "expansion-study", "operator": "theta", "field": 1, "point": [0, 0, 1],
              "expect_c0": 1, "expect_c2": -0.16666666666666666, "rel_tol": 0.02}},
    {"name": "sphere-eta", "space": {"model": "round-sphere", "n": 2},
     "task": {"kind": "expansion-study", "operator": "eta", "field": 1, "point": [0, 0, 1],
              "expect_c2": -0.08333333333333333, "rel_tol": 0.02}},
    {"name": "sphere-beta", "space": {"model": "round-sphere", "n": 2},
     "task": {"kind": "expansion-study", "operator": "beta", "field": 1, "point": [0, 0, 1],
              "expect_c2": -0.0625, "rel_tol": 0.02}},
    {"name": "torus-nu-cosine", "space": {"model": "flat-torus", "n": 2},
     "task": {"kind": "expansion-study", "operator": "nu", "field": {"kind": "cosine", "axis": 0},
              "point": [0, 0.3], "expect_c0": 1, "expect_c2": -4.934802200544679, "rel_tol": 0.02}}
  ]
})"},
      {"circle-heat-convergence", R"({
  "schema": "weakflow.scenario/1",
  "name": "circle-heat-convergence",
  "description": "Static heat Chernoff products on a 256-node circle against exact Fourier decay",
  "seed": 1,
  "space": {"model": "flat-torus", "n": 1, "backend": "nodes", "nodes": 256},
  "task": {"kind": "heat-convergence", "field": {"kind": "cosine", "axis": 0}, "propagation": "static",
           "elapsed": 0.02, "j_ladder": [25, 50, 100, 200, 400], "kernel": "nu",
           "max_error": 0.01, "monotone_noise": 0.2}
})"},
      {"sphere-conjugate-decay", R"({
  "schema": "weakflow.scenario/1",
  "name": "sphere-conjugate-decay",
  "description": "Conjugate propagation of a constant on the backward Ricci flow of the unit 2-sphere",
  "seed": 1,
  "space": {"model": "round-sphere", "n": 2, "flow": "ricci-backward", "interval": [0, 0.1],
            "backend": "nodes", "nodes": 500},
  "task": {"kind": "conjugate-convergence", "field": 1, "tau0": 0, "tau1": 0.1, "m": 64, "j": 64,
           "kernel": "beta", "max_error": 0.02, "mass_tol": 0.01}
})"},
      {"duality-residual", R"({
  "schema": "weakflow.scenario/1",
  "name": "duality-residual",
  "description": "Gap between conjugate propagation and pairing with the heat kernel",
  "seed": 1,
  "cases": [
    {"name": "static-torus",
     "space": {"model": "flat-torus", "n": 2, "interval": [0, 0.05], "backend": "nodes", "nodes": 64},
     "task": {"kind": "duality", "y": 9, "tau0": 0, "tau": 0.05, "schedules": [[32, 32]],
              "field": {"kind": "fourier", "terms": [{"k": [1, 0], "cos": 1}, {"k": [1, 1], "sin": 0.5}]},
              "max_gap": 0.005}},
    {"name": "shrinking-sphere",
     "space": {"model": "round-sphere", "n": 2, "flow": "ricci-backward", "interval": [0, 0.05],
               "backend": "nodes", "nodes": 200},
     "task": {"kind": "duality", "y": 17, "tau0": 0, "tau": 0.05, "schedules": [[8, 8], [16, 16]],
              "field": {"kind": "bump", "center": [0.6, 0, 0.8]}, "max_gap": 0.02, "require_decrease": true}}
  ]
})"},
      {"sphere-trace-formula", R"({
  "schema": "weakflow.scenario/1",
  "name": "sphere-trace-formula",
  "description": "Small-radius limit of the trace functional on the backward Ricci flow of the unit 2-sphere",
  "seed": 7,
  "cases": [
    {"name": "analytic",
     "space": {"model": "round-sphere", "n": 2, "flow": "ricci-backward", "interval": [0, 0.1]},
     "task": {"kind": "trace", "domain": "both", "tau": 0, "expect_ball": 1, "expect_sphere": 2, "rel_tol": 0.01}},
    {"name": "sampled",
     "space": {"model": "round-sphere", "n": 2, "flow": "ricci-backward", "interval": [0, 0.1],
               "backend": "sampled", "samples": {"N": 2000, "strategy": "quasi-uniform", "time_grid": [0, 0.05, 0.1]}},
     "task": {"kind": "trace", "domain": "both", "tau": 0, "centers": 20, "expect_ball": 1, "expect_sphere": 2,
              "rel_tol": 0.05}}
  ]
})"},
      {"sphere-ricci-saturation", R"({
  "schema": "weakflow.scenario/1",
  "name": "sphere-ricci-saturation",
  "description": "Saturation defect with self-consistent constants on shrinking and static spheres and a static torus",
  "seed": 1,
  "cases": [
    {"name": "shrinking-sphere", "space": {"model": "round-sphere", "n": 2, "flow": "ricci-backward"},
     "task": {"kind": "saturation", "variant": "ball", "constant_mode": "self-consistent",
              "expect_defect": 0, "abs_tol": 0.05}},
    {"name": "static-sphere", "space": {"model": "round-sphere", "n": 2}, "expect": "fail",
     "task": {"kind": "saturation", "variant": "ball", "constant_mode": "self-consistent",
              "expect_defect": -1, "abs_tol": 0.05}},
    {"name": "static-torus", "space": {"model": "flat-torus", "n": 2},
     "task": {"kind": "saturation", "variant": "ball", "constant_mode": "self-consistent",
              "expect_defect": 0, "abs_tol": 0.02}}
  ]
})"},
      {"wsrf-monotonicity", R"({
  "schema": "weakflow.scenario/1",
  "name": "wsrf-monotonicity",
  "description": "Lipschitz constants under heat flow on static spaces and on an expanding-scale counterexample",
  "seed": 9,
  "cases": [
    {"name": "static-sphere", "space": {"model": "round-sphere", "n": 2, "backend": "nodes", "nodes": 400},
     "task": {"kind": "wsrf", "field": {"kind": "random-smooth"}, "time_grid": [0, 0.05, 0.1, 0.15, 0.2],
              "m": 4, "j": 8}},
    {"name": "static-torus", "space": {"model": "flat-torus", "n": 2, "backend": "nodes", "nodes": 1024},
     "task": {"kind": "wsrf", "time_grid": [0, 0.005, 0.01, 0.015, 0.02], "m": 4, "j": 8,
              "field": {"kind": "fourier", "terms": [{"k": [1, 0], "cos": 0.6}, {"k": [0, 1], "sin": 0.4},
                                                      {"k": [1, 1], "cos": 0.2}]}}},
    {"name": "expanding-circle", "expect": "fail",
     "space": {"model": "flat-torus", "n": 1, "flow": {"law": "exponential", "rate": 50}, "interval": [0, 0.1],
               "backend": "nodes", "nodes": 64},
     "task": {"kind": "wsrf", "field": {"kind": "cosine", "axis": 0}, "time_grid": [0, 0.02, 0.04, 0.06],
              "m": 4, "j": 4}}
  ]
})"},
      {"coupled-contraction", R"({
  "schema": "weakflow.scenario/1",
  "name": "coupled-contraction",
  "description": "Exact optimal-transport costs between two coupled delta diffusions on a sampled static circle",
  "seed": 1,
  "space": {"model": "flat-torus", "n": 1, "backend": "sampled", "samples": {"N": 128, "strategy": "quasi-uniform"}},
  "task": {"kind": "contraction", "inits": [{"delta": 3}, {"delta": 40}], "costs": ["d", "d^2"],
           "tau_grid": [0, 0.02, 0.04, 0.06, 0.08], "m": 4, "j": 16, "kernel": "beta", "slack": 1e-6,
           "jensen_pairs": 100}
})"},
      {"convex-cost-crosscheck", R"({
  "schema": "weakflow.scenario/1",
  "name": "convex-cost-crosscheck",
  "description": "Contraction of convex costs implies WSRF on static, contracting and expanding circles",
  "seed": 1,
  "task": {"kind": "crosscheck", "flows": [
    {"name": "static-circle",
     "contraction": {"space": {"model": "flat-torus", "n": 1, "backend": "sampled", "samples": {"N": 64}},
                     "task": {"kind": "contraction", "inits": [{"delta": 3}, {"delta": 20}],
                              "costs": ["d", "d^2", {"polynomial": [1, 1]}],
                              "tau_grid": [0, 0.01, 0.02, 0.03], "m": 2, "j": 8}},
     "wsrf": {"space": {"model": "flat-torus", "n": 1, "backend": "nodes", "nodes": 64},
              "task": {"kind": "wsrf", "field": {"kind": "cosine", "axis": 0}, "time_grid": [0, 0.01, 0.02, 0.03],
                       "m": 4, "j": 4}}},
    {"name": "contracting-circle",
     "contraction": {"space": {"model": "flat-torus", "n": 1, "flow": {"law": "exponential", "rate": -5},
                               "interval": [0, 0.03], "backend": "sampled",
                               "samples": {"N": 64, "time_grid": [0, 0.01, 0.02, 0.03]}},
                     "task": {"kind": "contraction", "inits": [{"delta": 3}, {"delta": 20}],
                              "costs": ["d", "d^2", {"polynomial": [1, 1]}],
                              "tau_grid": [0, 0.01, 0.02, 0.03], "m": 2, "j": 8}},
     "wsrf": {"space": {"model": "flat-torus", "n": 1, "flow": {"law": "exponential", "rate": -5},
                        "interval": [0, 0.03], "backend": "nodes", "nodes": 64},
              "task": {"kind": "wsrf", "field": {"kind": "cosine", "axis": 0}, "time_grid": [0, 0.01, 0.02, 0.03],
                       "m": 4, "j": 4}}},
    {"name": "expanding-circle",
     "contraction": {"space": {"model": "flat-torus", "n": 1, "flow": {"law": "exponential", "rate": 50},
                               "interval": [0, 0.03], "backend": "sampled",
                               "samples": {"N": 64, "time_grid": [0, 0.01, 0.02, 0.03]}},
                     "task": {"kind": "contraction", "inits": [{"delta": 3}, {"delta": 20}],
                              "costs": ["d", "d^2", {"polynomial": [1, 1]}],
                              "tau_grid": [0, 0.01, 0.02, 0.03], "m": 2, "j": 8}},
     "wsrf": {"space": {"model": "flat-torus", "n": 1, "flow": {"law": "exponential", "rate": 50},
                        "interval": [0, 0.03], "backend": "nodes", "nodes": 64},
              "task": {"kind": "wsrf", "field": {"kind": "cosine", "axis": 0}, "time_grid": [0, 0.01, 0.02, 0.03],
                       "m": 4, "j": 4}}}
  ]}
})"},
      {"sampled-determinism", R"({
  "schema": "weakflow.scenario/1",
  "name": "sampled-determinism",
  "description": "Reruns every other bundled scenario with a fixed seed and compares data.csv byte for byte",
  "seed": 1,
  "task": {"kind": "determinism", "runs": 2,
           "scenarios": ["expansion-coefficients", "circle-heat-convergence", "sphere-conjugate-decay",
                         "duality-residual", "sphere-trace-formula", "sphere-ricci-saturation",
                         "wsrf-monotonicity", "coupled-contraction", "convex-cost-crosscheck"]}
})"},
  };
  return entries;
}

inline std::optional<nlohmann::json> catalogue_scenario(const std::string& name) {
  for (const auto& e : catalogue())
    if (name == e.name) return nlohmann::json::parse(e.text);
  return std::nullopt;
}

}  // namespace weakflow
