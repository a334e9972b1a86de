#pragma once

// Scalar Brownian paths sampled at a finest resolution and coarsened by
// block summation, so that every time step refinement sees the same
// realisation.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sllbar/errors.hpp"

namespace sllbar {

struct BrownianPath {
  std::uint64_t seed = 0;
  double T = 0.0;
  std::vector<double> increments;

  std::size_t n_fine() const noexcept { return increments.size(); }
};

/// Draws n_fine independent N(0, T / n_fine) increments from a 64-bit
/// Mersenne twister keyed by `seed`, then rounds each to a multiple of a
/// power of two q chosen so that sum |dW| <= 2^52 q. Every partial sum of
/// the path is then an exact double, whatever the summation order, and
/// coarsening commutes with itself and with the total bit for bit. The
/// rounding moves each increment by at most 2^-53 sum |dW|.
inline BrownianPath sample_path(std::uint64_t seed, double T, std::size_t n_fine) {
  if (n_fine < 1) throw InvalidArgument("stochastic", "a path needs at least one increment");
  if (!(T > 0.0)) throw InvalidArgument("stochastic", "final time must be positive");
  BrownianPath path;
  path.seed = seed;
  path.T = T;
  path.increments.resize(n_fine);
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(T / static_cast<double>(n_fine)));
  double variation = 0.0;
  for (double& dw : path.increments) {
    dw = normal(engine);
    variation += std::abs(dw);
  }
  if (variation > 0.0) {
    const double q = std::ldexp(1.0, std::ilogb(2.0 * variation) + 1 - 52);
    for (double& dw : path.increments) dw = std::nearbyint(dw / q) * q;
  }
  return path;
}

/// Left-to-right sum of a block; exact for sampled paths.
inline double block_sum(std::span<const double> block) {
  double s = 0.0;
  for (double x : block) s += x;
  return s;
}

/// Coarse increments: increment j is the block sum of fine increments
/// [j * factor, (j + 1) * factor).
inline std::vector<double> coarsen(std::span<const double> increments, std::size_t factor) {
  if (factor == 0 || increments.size() % factor != 0)
    throw InvalidArgument("stochastic", "coarsening factor " + std::to_string(factor) +
                                            " does not divide " + std::to_string(increments.size()));
  std::vector<double> out(increments.size() / factor);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = block_sum(increments.subspan(j * factor, factor));
  return out;
}

inline std::vector<double> coarsen(const BrownianPath& path, std::size_t factor) {
  return coarsen(std::span<const double>(path.increments), factor);
}

/// W(T).
inline double path_total(std::span<const double> increments) { return block_sum(increments); }

/// Audit dump of a path: header `n,t,dW`, one row per increment.
inline void write_increments_csv(std::ostream& out, const BrownianPath& path) {
  out << "n,t,dW\n";
  const double k = path.T / static_cast<double>(path.n_fine());
  char buf[96];
  for (std::size_t n = 0; n < path.n_fine(); ++n) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", n + 1, static_cast<double>(n + 1) * k, path.increments[n]);
    out << buf;
  }
}

/// Seed of Monte Carlo sample m.
inline std::uint64_t sample_seed(std::uint64_t base_seed, std::size_t sample) { return base_seed + sample; }

}  // namespace sllbar
