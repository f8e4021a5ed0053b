// Refinement study of static heat flow on a 128-node circle: doubles the
// stage counts until successive fields agree to 1e-4.
#include <iostream>

#include "weakflow/weakflow.hpp"

using namespace weakflow;

int main() {
  const auto circle = make_flat_torus(1, 1.0, FlowLaw::stationary()).with_nodes(128);
  const auto f = evaluate(parse_field(nlohmann::json{{"kind", "cosine"}, {"axis", 0}}, circle, 1), circle, 0.0);

  ChernoffSchedule start;
  start.inner = 16;
  const auto study = refine([&](const ChernoffSchedule& s) { return static_heat(circle, 0.0, 0.0, 0.02, s, f); },
                            start, 1e-4, 8);
  std::cout << refinement_csv(study);

  const double exact = std::exp(-4 * std::numbers::pi * std::numbers::pi * 0.02);
  std::cout << "converged: " << (study.converged ? "yes" : "no") << "\n"
            << "value at node 0: " << study.final.field.values[0] << " (exact " << exact << ")\n";
  if (study.final.converged_estimate)
    std::cout << "extrapolated value at node 0: " << (*study.final.converged_estimate)[0] << "\n";
}
