#pragma once

#include <cmath>
#include <random>

#include "sllbar/fields.hpp"

namespace sllbar::testing {

inline SpacePtr space(MeshFamily family, int level) { return FeSpace::create(build_mesh(family, level)); }
inline SpacePtr interval(int level) { return space(MeshFamily::Interval, level); }
inline SpacePtr square(int level) { return space(MeshFamily::Square, level); }

inline FeField random_field(const SpacePtr& s, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  NodalValues c(s->size(), 3);
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (int j = 0; j < 3; ++j) c(i, j) = u(rng);
  return FeField(s, std::move(c));
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec3(u(rng), u(rng), u(rng));
}

inline double max_abs(const NodalValues& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace sllbar::testing
