// Builds the n = 5 model over q = (3 + sqrt 5) / 2, then prints its spectral
// data, the lattice, a canonical form and curvature at one point.

#include <iostream>

#include "ecs/certify.hpp"

int main() {
  using namespace ecs;
  const auto sys = build_theorem22(3);
  const QFieldContext ctx(3);
  const auto md = build_model(sys, ctx, 1, FunctionChoice::homogeneous(sys.k, ctx.log_q()));

  std::cout << "m = " << md.m << ", k = " << sys.k << ", q = " << ctx.q_double() << "\n";
  std::cout << "E =";
  for (int i = 1; i <= sys.size(); ++i) std::cout << ' ' << sys.E[i];
  std::cout << "\na =";
  for (long a : md.a) std::cout << ' ' << a;
  std::cout << "\n";

  const auto l = build_L(md, ct_eigenbasis(md));
  const GammaHat g{};
  const auto sig = build_lattice(md, pi_map(md, l, g), sys.exponent_set());
  std::cout << "Xi =\n";
  for (const auto& row : matrix_json(sig.xi)) std::cout << "  " << row.dump() << "\n";
  std::cout << "char poly (constant first) = " << polynomial_json(sig.char_poly).dump() << "\n";

  const Point x{0.7, 0.25, Eigen::Vector3d(0.3, -0.2, 0.5)};
  const auto c = canonicalize(md, l, sig, g, x);
  std::cout << "canonical form of (0.7, 0.25, v): gamma-hat power " << c.r << ", t = " << c.t
            << ", lattice coordinates " << c.lattice_coords.transpose() << "\n";

  const auto rep = curvature_at(MetricPatch::from_model(md), to_coordinates(1.2, 0.0, Eigen::Vector3d(0.0, 1.0, 0.0)));
  std::cout << "||W|| = " << rep.weyl_norm << ", ||nabla W|| / ||W|| = " << rep.nabla_weyl
            << ", ||nabla R|| / ||R|| = " << rep.nabla_riemann << ", Olszak dimension " << rep.olszak.dim << "\n";
}
