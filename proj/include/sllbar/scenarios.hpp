#pragma once

// Built-in problem set-ups: coefficients, initial data and noise profiles of
// the thin-wire and thin-slab simulations, plus the desk/paper scale presets
// of each experiment.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "sllbar/errors.hpp"
#include "sllbar/mesh.hpp"
#include "sllbar/physics.hpp"

namespace sllbar {

/// Named initial data u0 and noise profiles g.
enum class Profile { Sim1, Sim2, Sim3, Constant, Zero };

inline Profile parse_profile(const std::string& name) {
  if (name == "sim1") return Profile::Sim1;
  if (name == "sim2") return Profile::Sim2;
  if (name == "sim3") return Profile::Sim3;
  if (name == "constant") return Profile::Constant;
  if (name == "zero") return Profile::Zero;
  throw InvalidArgument("scenarios", "unknown profile '" + name + "'");
}

inline std::string to_string(Profile p) {
  switch (p) {
    case Profile::Sim1: return "sim1";
    case Profile::Sim2: return "sim2";
    case Profile::Sim3: return "sim3";
    case Profile::Constant: return "constant";
    case Profile::Zero: return "zero";
  }
  return "zero";
}

/// Mesh family the profile is defined on; Constant and Zero work on both.
inline MeshFamily natural_family(Profile p) { return p == Profile::Sim1 ? MeshFamily::Interval : MeshFamily::Square; }

/// Initial magnetisation. `Constant` is the unit vector (sqrt(mu), 0, 0) scaled
/// to sit in the bottom of the double well.
inline VectorField initial_datum(Profile p, double mu = 1.0) {
  constexpr double pi = std::numbers::pi;
  switch (p) {
    case Profile::Sim1:
      return [](const Point& x) { return Vec3(0.1, std::cos(2.0 * pi * x.x), std::sin(2.0 * pi * x.x)); };
    case Profile::Sim2:
      return [](const Point& x) { return Vec3(-x.y, x.x, 0.0); };
    case Profile::Sim3:
      return [](const Point& x) { return Vec3(std::sin(2.0 * pi * x.y), std::sin(2.0 * pi * x.x), 0.0); };
    case Profile::Constant:
      return [s = std::sqrt(mu)](const Point&) { return Vec3(s, 0.0, 0.0); };
    case Profile::Zero:
      break;
  }
  return [](const Point&) { return Vec3::Zero().eval(); };
}

inline VectorField noise_profile(Profile p) {
  constexpr double pi = std::numbers::pi;
  switch (p) {
    case Profile::Sim1:
      return [](const Point& x) {
        return Vec3(2.0 * std::sin(pi * x.x), std::sin(pi * x.x), 2.0 * std::cos(2.0 * pi * x.x));
      };
    case Profile::Sim2:
      return [](const Point& x) { return Vec3(0.8 * (1.0 - x.x), 0.2, 0.5 * (1.0 + x.x)); };
    case Profile::Sim3:
      return [](const Point& x) { return Vec3(5.0 * (1.0 + x.x), 10.0 * (1.0 + x.y), 2.0 * std::cos(2.0 * pi * x.x)); };
    case Profile::Constant:
      return [](const Point&) { return Vec3(1.0, 0.0, 0.0); };
    case Profile::Zero:
      break;
  }
  return {};
}

inline ModelParams scenario_params(Profile p) {
  ModelParams m;
  switch (p) {
    case Profile::Sim1:
      m.lambda1 = 0.02; m.lambda2 = 0.001; m.gamma = 6.0; m.kappa = 0.5; m.mu = 1.0;
      m.beta1 = 0.1; m.beta2 = 0.05; m.nu = Vec2(1.0, 0.0);
      break;
    case Profile::Sim2:
      m.lambda1 = 0.2; m.lambda2 = 0.1; m.gamma = 5.0; m.kappa = 0.5; m.mu = 1.0;
      m.beta1 = 0.1; m.beta2 = 0.05; m.nu = Vec2(1.0, 0.0);
      break;
    case Profile::Sim3:
      m.lambda1 = 0.5; m.lambda2 = 0.05; m.gamma = 8.0; m.kappa = 0.25; m.mu = 1.0;
      m.beta1 = 0.2; m.beta2 = 0.1; m.nu = Vec2(2.0, 0.0);
      break;
    case Profile::Constant:
    case Profile::Zero:
      break;
  }
  return m;
}

}  // namespace sllbar
