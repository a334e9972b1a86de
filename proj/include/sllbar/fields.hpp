#pragma once

// R^3-valued P1 finite element functions and the operators acting on them:
// L2 projection, Ritz projection, discrete Laplacian, norms, prolongation.

#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "sllbar/assembly.hpp"
#include "sllbar/errors.hpp"
#include "sllbar/mesh.hpp"

namespace sllbar {

/// Spatial gradient of an R^3-valued function: column i holds d/dx_i. In 1D
/// the second column is ignored.
using Grad3 = Eigen::Matrix<double, 3, 2>;

/// A mesh together with everything that depends only on it: mass and
/// stiffness operators, their factorizations, cell geometry and quadrature
/// points. Immutable after construction, so it can be shared across threads.
class FeSpace {
public:
  explicit FeSpace(Mesh mesh) : mesh_(std::move(mesh)), rule_(default_rule(mesh_.dim())) {
    mass_ = assemble_mass(mesh_);
    stiffness_ = assemble_stiffness(mesh_);
    const auto n = static_cast<Eigen::Index>(mesh_.num_vertices());

    mass_solver_.compute(mass_.matrix);
    if (mass_solver_.info() != Eigen::Success) throw LinearSolveFailed("fields", "mass matrix factorization");

    // Stiffness with the first degree of freedom pinned to zero.
    SparseMatrix pinned = stiffness_.matrix;
    for (Eigen::Index k = 0; k < pinned.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(pinned, k); it; ++it)
        if (it.row() == 0 || it.col() == 0) it.valueRef() = (it.row() == it.col()) ? 1.0 : 0.0;
    pinned.prune(0.0);
    pinned_solver_.compute(pinned);
    if (pinned_solver_.info() != Eigen::Success)
      throw LinearSolveFailed("fields", "pinned stiffness factorization");

    hat_integrals_ = mass_.matrix * Eigen::VectorXd::Ones(n);

    geometry_.reserve(mesh_.num_cells());
    qpoints_.reserve(mesh_.num_cells() * rule_.size());
    for (std::size_t c = 0; c < mesh_.num_cells(); ++c) {
      geometry_.push_back(cell_geometry(mesh_, c));
      for (const auto& p : rule_.points) qpoints_.push_back(map_to_cell(mesh_, c, p));
    }
  }

  static std::shared_ptr<const FeSpace> create(Mesh mesh) {
    return std::make_shared<const FeSpace>(std::move(mesh));
  }

  const Mesh& mesh() const noexcept { return mesh_; }
  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(mesh_.num_vertices()); }
  const SparseMatrix& mass() const noexcept { return mass_.matrix; }
  const SparseMatrix& stiffness() const noexcept { return stiffness_.matrix; }
  const QuadratureRule& rule() const noexcept { return rule_; }
  const CellGeometry& geometry(std::size_t c) const { return geometry_[c]; }
  /// Physical location of quadrature point q of cell c.
  const Point& qpoint(std::size_t c, std::size_t q) const { return qpoints_[c * rule_.size() + q]; }
  /// Weight of quadrature point q of cell c, including the cell measure.
  double qweight(std::size_t c, std::size_t q) const {
    return rule_.weights[q] * geometry_[c].measure / rule_.reference_measure;
  }
  /// int phi_i dx for every vertex.
  const Eigen::VectorXd& hat_integrals() const noexcept { return hat_integrals_; }

  NodalValues solve_mass(const NodalValues& rhs) const {
    NodalValues x = mass_solver_.solve(rhs);
    if (mass_solver_.info() != Eigen::Success) throw LinearSolveFailed("fields", "mass solve");
    return x;
  }

  /// Solves K x = rhs per component with x(0) = 0. rhs must be compatible
  /// (column sums zero) for the result to satisfy every equation.
  NodalValues solve_stiffness_pinned(NodalValues rhs) const {
    rhs.row(0).setZero();
    NodalValues x = pinned_solver_.solve(rhs);
    if (pinned_solver_.info() != Eigen::Success) throw LinearSolveFailed("fields", "stiffness solve");
    return x;
  }

private:
  Mesh mesh_;
  QuadratureRule rule_;
  SparseOperator mass_;
  SparseOperator stiffness_;
  Eigen::SimplicialLDLT<SparseMatrix> mass_solver_;
  Eigen::SimplicialLDLT<SparseMatrix> pinned_solver_;
  Eigen::VectorXd hat_integrals_;
  std::vector<CellGeometry> geometry_;
  std::vector<Point> qpoints_;
};

using SpacePtr = std::shared_ptr<const FeSpace>;

/// R^3-valued P1 function: nodal coefficients over a shared space.
class FeField {
public:
  FeField() = default;
  explicit FeField(SpacePtr space)
      : space_(std::move(space)), coeffs_(NodalValues::Zero(space_->size(), 3)) {}
  FeField(SpacePtr space, NodalValues coeffs) : space_(std::move(space)), coeffs_(std::move(coeffs)) {
    if (coeffs_.rows() != space_->size())
      throw InvalidArgument("fields", "coefficient count does not match the mesh");
  }

  const SpacePtr& space() const noexcept { return space_; }
  const FeSpace& fe() const { return *space_; }
  const Mesh& mesh() const { return space_->mesh(); }
  const NodalValues& coeffs() const noexcept { return coeffs_; }
  NodalValues& coeffs() noexcept { return coeffs_; }

  Vec3 at_vertex(std::size_t i) const { return coeffs_.row(static_cast<Eigen::Index>(i)).transpose(); }

  bool all_finite() const { return coeffs_.allFinite(); }
  /// Largest Euclidean norm of a nodal value.
  double max_pointwise_norm() const { return coeffs_.rowwise().norm().maxCoeff(); }

  FeField& operator+=(const FeField& o) { coeffs_ += o.coeffs_; return *this; }
  FeField& operator-=(const FeField& o) { coeffs_ -= o.coeffs_; return *this; }
  friend FeField operator-(FeField a, const FeField& b) { return a -= b; }
  friend FeField operator+(FeField a, const FeField& b) { return a += b; }

private:
  SpacePtr space_;
  NodalValues coeffs_;
};

/// Value of a P1 field at quadrature point q of cell c.
inline Vec3 value_at(const FeSpace& space, const NodalValues& v, std::size_t c, std::size_t q) {
  const auto& k = space.mesh().cell(c);
  const auto& bary = space.rule().points[q];
  Vec3 out = Vec3::Zero();
  for (int a = 0; a < space.mesh().vertices_per_cell(); ++a)
    out += bary[a] * v.row(static_cast<Eigen::Index>(k[a])).transpose();
  return out;
}

/// Constant gradient of a P1 field on cell c (3 x 2, second column zero in 1D).
inline Grad3 gradient_on(const FeSpace& space, const NodalValues& v, std::size_t c) {
  const auto& k = space.mesh().cell(c);
  const auto& g = space.geometry(c);
  Grad3 out = Grad3::Zero();
  for (int a = 0; a < space.mesh().vertices_per_cell(); ++a) {
    const Vec3 va = v.row(static_cast<Eigen::Index>(k[a])).transpose();
    out.col(0) += g.grad[a][0] * va;
    out.col(1) += g.grad[a][1] * va;
  }
  return out;
}

/// Nodal interpolant of a callable Point -> Vec3.
template <class Fn>
FeField interpolate(const SpacePtr& space, Fn&& fn) {
  NodalValues c(space->size(), 3);
  for (Eigen::Index i = 0; i < space->size(); ++i)
    c.row(i) = fn(space->mesh().vertex(static_cast<std::size_t>(i))).transpose();
  return FeField(space, std::move(c));
}

/// Sparse matrix P (fine x coarse) with fine = P * coarse for nested P1 spaces.
inline SparseMatrix prolongation_matrix(const Mesh& coarse, const Mesh& fine) {
  const ProlongationMap map = prolongation_map(coarse, fine);
  Triplets t;
  t.reserve(map.entries.size() * 3);
  for (std::size_t J = 0; J < map.entries.size(); ++J) {
    const auto& e = map.entries[J];
    for (int a = 0; a < e.count; ++a)
      if (e.weights[a] != 0.0) t.emplace_back(J, e.coarse_vertices[a], e.weights[a]);
  }
  SparseMatrix p(static_cast<Eigen::Index>(fine.num_vertices()), static_cast<Eigen::Index>(coarse.num_vertices()));
  p.setFromTriplets(t.begin(), t.end());
  return p;
}

/// Nodal evaluation of a coarse field at the vertices of a nested finer mesh.
/// Shared vertices receive the coarse coefficients bit-exactly.
inline FeField prolong(const FeField& v, const SpacePtr& fine) {
  const ProlongationMap map = prolongation_map(v.mesh(), fine->mesh());
  NodalValues out(fine->size(), 3);
  for (std::size_t J = 0; J < map.entries.size(); ++J) {
    const auto& e = map.entries[J];
    Vec3 value = Vec3::Zero();
    bool first = true;
    for (int a = 0; a < e.count; ++a) {
      if (e.weights[a] == 0.0) continue;
      const Vec3 term = e.weights[a] * v.at_vertex(e.coarse_vertices[a]);
      value = first ? term : Vec3(value + term);
      first = false;
    }
    out.row(static_cast<Eigen::Index>(J)) = value.transpose();
  }
  return FeField(fine, std::move(out));
}

/// L2 projection of a callable Point -> Vec3: solves M c = (target, phi).
template <class Fn>
FeField l2_project(const SpacePtr& space, Fn&& target) {
  const NodalValues b = assemble_load(space->mesh(), std::forward<Fn>(target), space->rule());
  return FeField(space, space->solve_mass(b));
}

/// L2 projection of a field living on a nested finer mesh. The load is
/// P^T M_fine v, which is exact because coarse hats are fine P1 functions.
inline FeField l2_project(const SpacePtr& space, const FeField& finer) {
  const SparseMatrix p = prolongation_matrix(space->mesh(), finer.mesh());
  const NodalValues b = p.transpose() * (finer.fe().mass() * finer.coeffs());
  return FeField(space, space->solve_mass(b));
}

namespace detail {

/// Shifts each component so that int (result - target) dx = 0.
inline FeField ritz_finish(const SpacePtr& space, NodalValues c, const Vec3& target_integral) {
  const Eigen::RowVector3d current = space->hat_integrals().transpose() * c;
  const double area = space->hat_integrals().sum();
  for (int comp = 0; comp < 3; ++comp) c.col(comp).array() += (target_integral(comp) - current(comp)) / area;
  return FeField(space, std::move(c));
}

}  // namespace detail

/// Ritz projection of a smooth target given its value and gradient.
template <class Value, class Gradient>
FeField ritz_project(const SpacePtr& space, Value&& value, Gradient&& gradient) {
  NodalValues b = NodalValues::Zero(space->size(), 3);
  Vec3 integral = Vec3::Zero();
  const auto& mesh = space->mesh();
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& k = mesh.cell(c);
    const auto& g = space->geometry(c);
    for (std::size_t q = 0; q < space->rule().size(); ++q) {
      const Point& x = space->qpoint(c, q);
      const double w = space->qweight(c, q);
      const Grad3 dv = gradient(x);
      integral += w * value(x);
      for (int a = 0; a < mesh.vertices_per_cell(); ++a)
        b.row(static_cast<Eigen::Index>(k[a])) += w * (dv.col(0) * g.grad[a][0] + dv.col(1) * g.grad[a][1]).transpose();
    }
  }
  return detail::ritz_finish(space, space->solve_stiffness_pinned(std::move(b)), integral);
}

/// Ritz projection of a field on a nested finer mesh.
inline FeField ritz_project(const SpacePtr& space, const FeField& finer) {
  const SparseMatrix p = prolongation_matrix(space->mesh(), finer.mesh());
  NodalValues b = p.transpose() * (finer.fe().stiffness() * finer.coeffs());
  const Vec3 integral = (finer.fe().hat_integrals().transpose() * finer.coeffs()).transpose();
  return detail::ritz_finish(space, space->solve_stiffness_pinned(std::move(b)), integral);
}

/// Discrete Laplacian: the w in V_h with (w, chi) = -(grad v, grad chi).
inline FeField discrete_laplacian(const FeField& v) {
  const NodalValues rhs = -(v.fe().stiffness() * v.coeffs());
  return FeField(v.space(), v.fe().solve_mass(rhs));
}

/// L2 (s = 0) or full H1 (s = 1) norm, summed over the three components.
inline double norm(const FeField& v, int s) {
  if (s != 0 && s != 1) throw InvalidArgument("fields", "norm index must be 0 or 1");
  const NodalValues& c = v.coeffs();
  double sq = (c.transpose() * (v.fe().mass() * c)).trace();
  if (s == 1) sq += (c.transpose() * (v.fe().stiffness() * c)).trace();
  return std::sqrt(std::max(sq, 0.0));
}

/// L2 inner product of two fields on the same space.
inline double inner(const FeField& a, const FeField& b) {
  return (a.coeffs().transpose() * (a.fe().mass() * b.coeffs())).trace();
}

/// Writes `x[,y],<p>1,<p>2,<p>3` rows, one per vertex.
inline void write_csv(std::ostream& out, const FeField& v, const std::string& prefix = "u") {
  const bool two_d = v.mesh().dim() == 2;
  out << (two_d ? "x,y," : "x,") << prefix << "1," << prefix << "2," << prefix << "3\n";
  char buf[160];
  for (std::size_t i = 0; i < v.mesh().num_vertices(); ++i) {
    const Point& p = v.mesh().vertex(i);
    const auto r = static_cast<Eigen::Index>(i);
    if (two_d)
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", p.x, p.y, v.coeffs()(r, 0),
                    v.coeffs()(r, 1), v.coeffs()(r, 2));
    else
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", p.x, v.coeffs()(r, 0), v.coeffs()(r, 1),
                    v.coeffs()(r, 2));
    out << buf;
  }
}

}  // namespace sllbar
