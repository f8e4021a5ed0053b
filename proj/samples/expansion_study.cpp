// Prints the small-radius fits of every averaging operator for f = 1 on the
// unit 2-sphere and for f = cos(2 pi x1) on the unit 2-torus.
#include <iostream>

#include "weakflow/weakflow.hpp"

using namespace weakflow;

int main() {
  const auto sphere = make_round_sphere(2, 1.0, FlowLaw::stationary());
  const auto torus = make_flat_torus(2, 1.0, FlowLaw::stationary());
  const PointFunction one = [](const Point&) { return 1.0; };
  const PointFunction wave = [](const Point& x) { return std::cos(2 * std::numbers::pi * x[0]); };

  std::cout << limit_fit_csv_header() << "\n";
  for (auto kind : {OperatorKind::sigma, OperatorKind::nu, OperatorKind::theta, OperatorKind::eta,
                    OperatorKind::alpha, OperatorKind::beta}) {
    const Point north = Eigen::Vector3d(0, 0, 1);
    std::cout << limit_fit_csv_row(kind, "sphere", expansion_fit(kind, sphere, 0.0, north, one)) << "\n";
  }
  for (auto kind : {OperatorKind::sigma, OperatorKind::nu}) {
    const Point origin = Eigen::Vector2d(0, 0.3);
    std::cout << limit_fit_csv_row(kind, "torus", expansion_fit(kind, torus, 0.0, origin, wave)) << "\n";
  }
}
