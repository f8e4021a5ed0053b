// Two delta diffusions on a sampled static circle: prints W1, W2 and the
// optimal plan's size at each slice.
#include <iostream>

#include "weakflow/weakflow.hpp"

using namespace weakflow;

int main() {
  const auto circle = sample(make_flat_torus(1, 1.0, FlowLaw::stationary()), 96, 1, SamplingStrategy::quasi_uniform);
  ChernoffSchedule schedule;
  schedule.kernel = OperatorKind::beta;
  schedule.outer = 4;
  schedule.inner = 8;
  const std::vector<double> grid{0.0, 0.01, 0.02, 0.04, 0.08};
  const auto a = make_diffusion(circle, 0.0, DiffusionInit::delta(3), grid, schedule);
  const auto b = make_diffusion(circle, 0.0, DiffusionInit::delta(50), grid, schedule);

  std::cout << "tau,w1,w2,plan_entries\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto mu = a.masses(circle, k);
    const auto nu = b.masses(circle, k);
    const auto quadratic = ot_cost(circle, grid[k], mu, nu, CostSpec::distance_squared());
    std::cout << format_number(grid[k]) << "," << format_number(wasserstein(circle, grid[k], mu, nu, 1)) << ","
              << format_number(std::sqrt(quadratic.total_cost)) << "," << quadratic.plan.entries.size() << "\n";
  }
}
