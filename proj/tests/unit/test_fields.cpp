#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "helpers.hpp"
#include "sllbar/fields.hpp"

using namespace sllbar;
using namespace sllbar::testing;

namespace {

constexpr double pi = std::numbers::pi;

Vec3 sin_e1(const Point& p) { return Vec3(std::sin(2 * pi * p.x), 0, 0); }

/// ||v - f||_{L2} for a P1 field v and smooth f, by the space's quadrature.
template <class Fn>
double l2_distance(const FeField& v, Fn&& f) {
  const auto& space = v.fe();
  double s = 0.0;
  for (std::size_t c = 0; c < space.mesh().num_cells(); ++c)
    for (std::size_t q = 0; q < space.rule().size(); ++q)
      s += space.qweight(c, q) * (value_at(space, v.coeffs(), c, q) - f(space.qpoint(c, q))).squaredNorm();
  return std::sqrt(s);
}

/// ||grad(v) - grad f||_{L2}, 1D, gradient of f supplied.
template <class Grad>
double h1_seminorm_distance(const FeField& v, Grad&& df) {
  const auto& space = v.fe();
  double s = 0.0;
  for (std::size_t c = 0; c < space.mesh().num_cells(); ++c) {
    const Grad3 g = gradient_on(space, v.coeffs(), c);
    for (std::size_t q = 0; q < space.rule().size(); ++q)
      s += space.qweight(c, q) * (g.col(0) - df(space.qpoint(c, q))).squaredNorm();
  }
  return std::sqrt(s);
}

}  // namespace

TEST(L2Projection, IdempotentOnDiscreteSpace) {
  std::mt19937_64 rng(1);
  for (auto s : {interval(4), square(3)}) {
    const FeField v = random_field(s, rng);
    const FeField p = l2_project(s, v);
    EXPECT_LE(max_abs(p.coeffs() - v.coeffs()), 1e-10);
    EXPECT_LE(max_abs(l2_project(s, p).coeffs() - p.coeffs()), 1e-10);
  }
}

TEST(L2Projection, ConstantTarget) {
  for (auto s : {interval(3), square(2)}) {
    const FeField p = l2_project(s, [](const Point&) { return Vec3(1.5, -2.0, 0.25); });
    for (Eigen::Index i = 0; i < s->size(); ++i) {
      EXPECT_NEAR(p.coeffs()(i, 0), 1.5, 1e-12);
      EXPECT_NEAR(p.coeffs()(i, 1), -2.0, 1e-12);
      EXPECT_NEAR(p.coeffs()(i, 2), 0.25, 1e-12);
    }
  }
}

TEST(L2Projection, OrthogonalToEveryHat) {
  const auto s = interval(5);
  auto f = [](const Point& p) { return Vec3(std::exp(p.x), p.x * p.x * p.x, std::cos(3 * p.x)); };
  const FeField p = l2_project(s, f);
  const NodalValues residual = s->mass() * p.coeffs() - assemble_load(s->mesh(), f, s->rule());
  EXPECT_LE(max_abs(residual), 1e-12);
}

TEST(L2Projection, SecondOrderRefinement) {
  double previous = 0.0;
  for (int level = 5; level <= 7; ++level) {
    const double e = l2_distance(l2_project(interval(level), sin_e1), sin_e1);
    if (level > 5) {
      EXPECT_NEAR(previous / e, 4.0, 0.8) << "level " << level;
    }
    previous = e;
  }
}

TEST(L2Projection, FromFinerField) {
  // dense oracle: coarse mass solve against the load P^T M_fine v
  const auto coarse = interval(3);
  const auto fine = interval(6);
  const FeField v = interpolate(fine, sin_e1);
  const FeField from_field = l2_project(coarse, v);
  const FeField oracle = [&] {
    const NodalValues b = prolongation_matrix(coarse->mesh(), fine->mesh()).transpose() * (fine->mass() * v.coeffs());
    return FeField(coarse, Eigen::MatrixXd(Eigen::MatrixXd(coarse->mass()).ldlt().solve(b)));
  }();
  EXPECT_LE(max_abs(from_field.coeffs() - oracle.coeffs()), 1e-12);
}

TEST(RitzProjection, ReproducesAffineAndConstant) {
  for (auto s : {interval(4), square(3)}) {
    auto value = [](const Point& p) { return Vec3(1 + 2 * p.x - p.y, -3 * p.x, 0.5); };
    auto grad = [](const Point&) {
      Grad3 g;
      g << 2, -1, -3, 0, 0, 0;
      return g;
    };
    const FeField r = ritz_project(s, value, grad);
    for (Eigen::Index i = 0; i < s->size(); ++i)
      EXPECT_LE((r.at_vertex(i) - value(s->mesh().vertex(i))).cwiseAbs().maxCoeff(), 1e-10);
    const Vec3 mean_gap = (s->hat_integrals().transpose() * r.coeffs()).transpose() -
                          assemble_load(s->mesh(), value, s->rule()).colwise().sum().transpose();
    EXPECT_LE(mean_gap.cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(RitzProjection, MeanConstraintAndOrthogonality) {
  const auto s = interval(5);
  auto value = [](const Point& p) { return Vec3(0, std::cos(2 * pi * p.x), std::exp(p.x)); };
  auto grad = [](const Point& p) {
    Grad3 g = Grad3::Zero();
    g(1, 0) = -2 * pi * std::sin(2 * pi * p.x);
    g(2, 0) = std::exp(p.x);
    return g;
  };
  const FeField r = ritz_project(s, value, grad);
  // mean-value condition
  const Vec3 integral_r = (s->hat_integrals().transpose() * r.coeffs()).transpose();
  EXPECT_NEAR(integral_r(1), 0.0, 1e-10);
  EXPECT_NEAR(integral_r(2), std::exp(1.0) - 1.0, 1e-10);
}

TEST(RitzProjection, FirstOrderGradientRefinement) {
  auto value = [](const Point& p) { return Vec3(0, std::cos(2 * pi * p.x), 0); };
  auto grad = [](const Point& p) {
    Grad3 g = Grad3::Zero();
    g(1, 0) = -2 * pi * std::sin(2 * pi * p.x);
    return g;
  };
  auto dv = [](const Point& p) { return Vec3(0, -2 * pi * std::sin(2 * pi * p.x), 0); };
  double previous = 0.0;
  for (int level = 4; level <= 6; ++level) {
    const double e = h1_seminorm_distance(ritz_project(interval(level), value, grad), dv);
    if (level > 4) {
      EXPECT_NEAR(previous / e, 2.0, 0.4);
    }
    previous = e;
  }
}

TEST(RitzProjection, FromFinerFieldAgreesWithAnalytic) {
  auto value = [](const Point& p) { return Vec3(p.x * p.x, 0, 0); };
  auto grad = [](const Point& p) {
    Grad3 g = Grad3::Zero();
    g(0, 0) = 2 * p.x;
    return g;
  };
  const auto coarse = interval(3);
  const FeField fine = ritz_project(interval(8), value, grad);
  const FeField a = ritz_project(coarse, fine);
  const FeField b = ritz_project(coarse, value, grad);
  EXPECT_LE(max_abs(a.coeffs() - b.coeffs()), 1e-4);
}

TEST(DiscreteLaplacian, VanishesOnConstants) {
  for (auto s : {interval(4), square(3)}) {
    const FeField c = interpolate(s, [](const Point&) { return Vec3(1, 2, 3); });
    EXPECT_LE(max_abs(discrete_laplacian(c).coeffs()), 1e-12);
  }
}

TEST(DiscreteLaplacian, DefiningIdentityOnRandomFields) {
  std::mt19937_64 rng(11);
  for (auto s : {interval(5), square(3)}) {
    for (int trial = 0; trial < 20; ++trial) {
      const FeField v = random_field(s, rng);
      const FeField chi = random_field(s, rng);
      const FeField w = discrete_laplacian(v);
      const double lhs = inner(w, chi);
      const double rhs = -(v.coeffs().transpose() * (s->stiffness() * chi.coeffs())).trace();
      EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST(DiscreteLaplacian, MatchesDenseSolveForParabola) {
  const auto s = interval(4);
  const FeField v = interpolate(s, [](const Point& p) { return Vec3(p.x * (1 - p.x), 0, 0); });
  const FeField w = discrete_laplacian(v);
  const Eigen::MatrixXd m(s->mass());
  const Eigen::MatrixXd k(s->stiffness());
  const Eigen::VectorXd oracle = m.partialPivLu().solve(-k * v.coeffs().col(0));
  EXPECT_LE((w.coeffs().col(0) - oracle).cwiseAbs().maxCoeff(), 1e-10);
  // mid-interval values approach -2; the natural boundary rows pick up the
  // nonzero slope of x(1-x) scaled by 1/h
  for (Eigen::Index i = 6; i <= 10; ++i) EXPECT_NEAR(w.coeffs()(i, 0), -2.0, 0.025);
  EXPECT_GT(w.coeffs()(0, 0), 8.0);
  EXPECT_NEAR(w.coeffs()(0, 0), w.coeffs()(16, 0), 1e-10);
}

TEST(Norm, Examples) {
  const auto s = interval(6);
  const FeField one = interpolate(s, [](const Point&) { return Vec3(1, 0, 0); });
  EXPECT_NEAR(norm(one, 0), 1.0, 1e-14);
  EXPECT_NEAR(norm(one, 1), 1.0, 1e-14);
  EXPECT_EQ(norm(FeField(s), 0), 0.0);
  EXPECT_EQ(norm(FeField(s), 1), 0.0);
  EXPECT_NEAR(norm(interpolate(s, sin_e1), 0), std::sqrt(0.5), 1e-3);
  EXPECT_THROW(norm(one, 2), InvalidArgument);
}

TEST(Prolong, SharedVerticesAreBitExact) {
  std::mt19937_64 rng(3);
  for (auto family : {MeshFamily::Interval, MeshFamily::Square}) {
    const auto coarse = space(family, 2);
    const auto fine = space(family, 4);
    const FeField v = random_field(coarse, rng);
    const FeField p = prolong(v, fine);
    for (std::size_t i = 0; i < coarse->mesh().num_vertices(); ++i) {
      const Point& x = coarse->mesh().vertex(i);
      for (std::size_t J = 0; J < fine->mesh().num_vertices(); ++J) {
        const Point& y = fine->mesh().vertex(J);
        if (x.x == y.x && x.y == y.y) {
          EXPECT_EQ(p.at_vertex(J)(0), v.at_vertex(i)(0));
          EXPECT_EQ(p.at_vertex(J)(1), v.at_vertex(i)(1));
          EXPECT_EQ(p.at_vertex(J)(2), v.at_vertex(i)(2));
        }
      }
    }
  }
}

TEST(Prolong, PreservesNorms) {
  std::mt19937_64 rng(5);
  for (auto family : {MeshFamily::Interval, MeshFamily::Square}) {
    const auto coarse = space(family, 2);
    const auto fine = space(family, 5);
    const FeField v = random_field(coarse, rng);
    const FeField p = prolong(v, fine);
    EXPECT_NEAR(norm(p, 0), norm(v, 0), 1e-12);
    EXPECT_NEAR(norm(p, 1), norm(v, 1), 1e-12);
  }
}

TEST(Prolong, IdentityAndAffine) {
  const auto s = square(3);
  std::mt19937_64 rng(9);
  const FeField v = random_field(s, rng);
  EXPECT_EQ(max_abs(prolong(v, s).coeffs() - v.coeffs()), 0.0);
  auto f = [](const Point& p) { return Vec3(p.x + p.y, 1 - p.x, 2 * p.y); };
  const auto fine = square(5);
  EXPECT_LE(max_abs(prolong(interpolate(s, f), fine).coeffs() - interpolate(fine, f).coeffs()), 1e-14);
  EXPECT_THROW(prolong(v, interval(5)), MeshMismatch);
}

TEST(FieldCsv, HeaderAndRows) {
  const auto s = square(1);
  const FeField v = interpolate(s, [](const Point& p) { return Vec3(p.x, p.y, 1); });
  std::ostringstream out;
  write_csv(out, v);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x,y,u1,u2,u3");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 9);
  std::ostringstream out1;
  write_csv(out1, interpolate(interval(1), [](const Point&) { return Vec3(0, 0, 0); }));
  EXPECT_EQ(out1.str().substr(0, out1.str().find('\n')), "x,u1,u2,u3");
}
