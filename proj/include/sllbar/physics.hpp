#pragma once

// Pointwise nonlinearities of the model: Ginzburg-Landau force and potential,
// the C^2 bump truncation, the convective term, the mass source and the
// noise coefficient.

#include <cmath>
#include <functional>
#include <string>

#include "sllbar/assembly.hpp"
#include "sllbar/errors.hpp"

namespace sllbar {

/// Spin current direction; only the first `dim` entries are used.
using Vec2 = Eigen::Vector2d;

enum class MassSource { Zero, Linear };

struct ModelParams {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double gamma = 0.0;
  double kappa = 0.0;
  double mu = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  /// Truncation radius of the bump function.
  double R = 100.0;
  Vec2 nu = Vec2::Zero();
  MassSource mass_source = MassSource::Zero;

  double nu_sup_norm() const { return nu.cwiseAbs().maxCoeff(); }

  /// No term of the scheme is bilinear in the unknowns.
  bool is_imex() const { return gamma == 0.0 && beta2 == 0.0; }

  void validate() const {
    for (double v : {lambda1, lambda2, gamma, kappa, mu, beta1, beta2})
      if (!std::isfinite(v) || v < 0.0)
        throw InvalidArgument("physics", "model coefficients must be finite and non-negative");
    if (!std::isfinite(R) || R <= 0.0) throw InvalidArgument("physics", "truncation radius must be positive");
    if (!nu.allFinite()) throw InvalidArgument("physics", "spin current must be finite");
  }
};

/// kappa (|u|^2 - mu)^2 / 4
inline double potential(const Vec3& u, double kappa, double mu) {
  const double d = u.squaredNorm() - mu;
  return 0.25 * kappa * d * d;
}

/// kappa mu u - kappa |u|^2 u, the negative gradient of the potential.
inline Vec3 gl_force(const Vec3& u, double kappa, double mu) {
  return (kappa * mu - kappa * u.squaredNorm()) * u;
}

inline Mat3 gl_force_jacobian(const Vec3& u, double kappa, double mu) {
  return (kappa * mu - kappa * u.squaredNorm()) * Mat3::Identity() - 2.0 * kappa * u * u.transpose();
}

namespace detail {
// Quintic smoothstep 6t^5 - 15t^4 + 10t^3 and its derivative.
inline double smoothstep5(double t) { return t * t * t * (10.0 + t * (-15.0 + 6.0 * t)); }
inline double smoothstep5_derivative(double t) { return 30.0 * t * t * (1.0 - t) * (1.0 - t); }
}  // namespace detail

/// Radial C^2 bump: 1 on |u| <= R, 0 on |u| >= 2R, quintic in between.
inline double bump(const Vec3& u, double R) {
  const double r = u.norm();
  if (r <= R) return 1.0;
  if (r >= 2.0 * R) return 0.0;
  return 1.0 - detail::smoothstep5((r - R) / R);
}

inline Vec3 bump_gradient(const Vec3& u, double R) {
  const double r = u.norm();
  if (r <= R || r >= 2.0 * R) return Vec3::Zero();
  return (-detail::smoothstep5_derivative((r - R) / R) / (R * r)) * u;
}

inline Vec3 truncated_force(const Vec3& u, const ModelParams& p) {
  return bump(u, p.R) * gl_force(u, p.kappa, p.mu);
}

/// Jacobian of truncated_force: f(u) (grad phi_R)^T + phi_R Df(u).
inline Mat3 truncated_force_jacobian(const Vec3& u, const ModelParams& p) {
  const double phi = bump(u, p.R);
  if (phi == 0.0) return Mat3::Zero();
  return gl_force(u, p.kappa, p.mu) * bump_gradient(u, p.R).transpose() +
         phi * gl_force_jacobian(u, p.kappa, p.mu);
}

/// Directional derivative (nu . grad) u from a 3 x 2 gradient.
inline Vec3 along_current(const Grad3& grad_u, const ModelParams& p, int dim) {
  Vec3 w = p.nu(0) * grad_u.col(0);
  if (dim == 2) w += p.nu(1) * grad_u.col(1);
  return w;
}

/// beta1 (nu . grad) u + beta2 u x (nu . grad) u
inline Vec3 convective(const Vec3& u, const Grad3& grad_u, const ModelParams& p, int dim) {
  const Vec3 w = along_current(grad_u, p, dim);
  return p.beta1 * w + p.beta2 * u.cross(w);
}

inline Vec3 mass_source(const Vec3& u, const ModelParams& p) {
  switch (p.mass_source) {
    case MassSource::Linear:
      return u;
    case MassSource::Zero:
      break;
  }
  return Vec3::Zero();
}

inline Vec3 truncated_mass_source(const Vec3& u, const ModelParams& p) {
  if (p.mass_source == MassSource::Zero) return Vec3::Zero();
  return bump(u, p.R) * mass_source(u, p);
}

/// G(u) = lambda1 g - gamma u x g at one point.
inline Vec3 noise_coefficient(const Vec3& u, const Vec3& g_at_x, const ModelParams& p) {
  return p.lambda1 * g_at_x - p.gamma * u.cross(g_at_x);
}

/// Spatial profile g of the noise, Point -> Vec3.
using VectorField = std::function<Vec3(const Point&)>;

}  // namespace sllbar
