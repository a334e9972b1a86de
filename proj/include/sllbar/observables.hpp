#pragma once

// Energy functional and pathwise strong-error metrics.

#include <cmath>

#include "sllbar/fields.hpp"
#include "sllbar/physics.hpp"

namespace sllbar {

struct EnergySample {
  double t = 0.0;
  double value = 0.0;
};

/// 1/2 |grad u|^2 + kappa/4 || |u|^2 - mu ||^2, the potential part by the
/// space's degree-4 quadrature (exact for P1 fields).
inline double energy(const FeField& u, double kappa, double mu) {
  const auto& space = u.fe();
  const NodalValues& c = u.coeffs();
  const double gradient_part = 0.5 * (c.transpose() * (space.stiffness() * c)).trace();
  double potential_part = 0.0;
  for (std::size_t cell = 0; cell < space.mesh().num_cells(); ++cell)
    for (std::size_t q = 0; q < space.rule().size(); ++q)
      potential_part += space.qweight(cell, q) * potential(value_at(space, c, cell, q), kappa, mu);
  return std::max(gradient_part, 0.0) + potential_part;
}

/// ||prolong(u_coarse) - u_ref||_{H^s} on the reference mesh.
inline double strong_error(const FeField& u_coarse, const FeField& u_ref, int s) {
  if (u_coarse.space() == u_ref.space()) return norm(u_coarse - u_ref, s);
  return norm(prolong(u_coarse, u_ref.space()) - u_ref, s);
}

}  // namespace sllbar
