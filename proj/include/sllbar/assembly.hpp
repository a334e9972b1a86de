#pragma once

// P1 operators on the structured meshes: exact element mass and stiffness
// matrices, and quadrature-based load vectors for R^3-valued integrands.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SparseCore>

#include "sllbar/mesh.hpp"

namespace sllbar {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
/// Nodal coefficients of an R^3-valued P1 function, one row per vertex.
using NodalValues = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

/// Quadrature on the reference simplex. Points are barycentric coordinates;
/// weights sum to the reference measure (1 for [0,1], 1/2 for the unit
/// triangle).
struct QuadratureRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  double reference_measure = 1.0;
  int degree = 0;

  std::size_t size() const noexcept { return weights.size(); }
};

/// 4-point Gauss-Legendre on [0,1], exact to degree 7.
inline QuadratureRule gauss_legendre_4() {
  const double a = 0.3399810435848562648;
  const double b = 0.8611363115940525752;
  const double wa = 0.6521451548625461426;
  const double wb = 0.3478548451374538574;
  QuadratureRule rule;
  rule.reference_measure = 1.0;
  rule.degree = 7;
  for (auto [xi, w] : {std::pair{-b, wb}, std::pair{-a, wa}, std::pair{a, wa}, std::pair{b, wb}}) {
    const double x = 0.5 * (1.0 + xi);
    rule.points.push_back({1.0 - x, x, 0.0});
    rule.weights.push_back(0.5 * w);
  }
  return rule;
}

/// Symmetric 6-point rule on the triangle, exact to degree 4.
inline QuadratureRule triangle_degree4() {
  const double a = 0.44594849091596488632;
  const double wa = 0.22338158967801146570;
  const double b = 0.09157621350977074346;
  const double wb = 0.10995174365532186764;
  QuadratureRule rule;
  rule.reference_measure = 0.5;
  rule.degree = 4;
  const double a1 = 1.0 - 2.0 * a;
  const double b1 = 1.0 - 2.0 * b;
  for (const auto& p : {std::array{a1, a, a}, std::array{a, a1, a}, std::array{a, a, a1}}) {
    rule.points.push_back(p);
    rule.weights.push_back(0.5 * wa);
  }
  for (const auto& p : {std::array{b1, b, b}, std::array{b, b1, b}, std::array{b, b, b1}}) {
    rule.points.push_back(p);
    rule.weights.push_back(0.5 * wb);
  }
  return rule;
}

inline QuadratureRule default_rule(int dim) { return dim == 1 ? gauss_legendre_4() : triangle_degree4(); }

/// Constant geometric data of one P1 cell.
struct CellGeometry {
  double measure = 0.0;
  /// Gradient of each barycentric coordinate (x, y components; y unused in 1D).
  std::array<std::array<double, 2>, 3> grad{};
};

inline CellGeometry cell_geometry(const Mesh& mesh, std::size_t c) {
  const auto& k = mesh.cell(c);
  CellGeometry g;
  const Point& p0 = mesh.vertex(k[0]);
  const Point& p1 = mesh.vertex(k[1]);
  if (mesh.dim() == 1) {
    const double h = p1.x - p0.x;
    g.measure = std::abs(h);
    g.grad[0] = {-1.0 / h, 0.0};
    g.grad[1] = {1.0 / h, 0.0};
    return g;
  }
  const Point& p2 = mesh.vertex(k[2]);
  const double det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
  g.measure = 0.5 * std::abs(det);
  g.grad[1] = {(p2.y - p0.y) / det, -(p2.x - p0.x) / det};
  g.grad[2] = {-(p1.y - p0.y) / det, (p1.x - p0.x) / det};
  g.grad[0] = {-g.grad[1][0] - g.grad[2][0], -g.grad[1][1] - g.grad[2][1]};
  return g;
}

inline Point map_to_cell(const Mesh& mesh, std::size_t c, const std::array<double, 3>& bary) {
  const auto& k = mesh.cell(c);
  Point p{0.0, 0.0};
  for (int a = 0; a < mesh.vertices_per_cell(); ++a) {
    p.x += bary[a] * mesh.vertex(k[a]).x;
    p.y += bary[a] * mesh.vertex(k[a]).y;
  }
  return p;
}

/// Assembled scalar bilinear form; applied per component to R^3 fields.
struct SparseOperator {
  SparseMatrix matrix;
  bool symmetric = false;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }
};

/// M_ij = (phi_i, phi_j) with exact element matrices.
inline SparseOperator assemble_mass(const Mesh& mesh) {
  const int nv = mesh.vertices_per_cell();
  Triplets t;
  t.reserve(mesh.num_cells() * nv * nv);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& k = mesh.cell(c);
    const double m = mesh.cell_measure(c);
    // 1D: h/6 [2 1; 1 2], 2D: |K|/12 [2 1 1; 1 2 1; 1 1 2]
    const double diag = mesh.dim() == 1 ? m / 3.0 : m / 6.0;
    const double off = mesh.dim() == 1 ? m / 6.0 : m / 12.0;
    for (int a = 0; a < nv; ++a)
      for (int b = 0; b < nv; ++b) t.emplace_back(k[a], k[b], a == b ? diag : off);
  }
  SparseOperator op;
  op.matrix.resize(mesh.num_vertices(), mesh.num_vertices());
  op.matrix.setFromTriplets(t.begin(), t.end());
  op.symmetric = true;
  return op;
}

/// K_ij = (grad phi_i, grad phi_j).
inline SparseOperator assemble_stiffness(const Mesh& mesh) {
  const int nv = mesh.vertices_per_cell();
  Triplets t;
  t.reserve(mesh.num_cells() * nv * nv);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& k = mesh.cell(c);
    const CellGeometry g = cell_geometry(mesh, c);
    for (int a = 0; a < nv; ++a)
      for (int b = 0; b < nv; ++b)
        t.emplace_back(k[a], k[b],
                       g.measure * (g.grad[a][0] * g.grad[b][0] + g.grad[a][1] * g.grad[b][1]));
  }
  SparseOperator op;
  op.matrix.resize(mesh.num_vertices(), mesh.num_vertices());
  op.matrix.setFromTriplets(t.begin(), t.end());
  op.symmetric = true;
  return op;
}

/// b_i = int integrand(x) phi_i(x) dx, integrand: Point -> Vec3.
template <class Integrand>
NodalValues assemble_load(const Mesh& mesh, Integrand&& integrand, const QuadratureRule& rule) {
  NodalValues b = NodalValues::Zero(static_cast<Eigen::Index>(mesh.num_vertices()), 3);
  const int nv = mesh.vertices_per_cell();
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& k = mesh.cell(c);
    const double scale = mesh.cell_measure(c) / rule.reference_measure;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec3 value = integrand(map_to_cell(mesh, c, rule.points[q]));
      const double w = rule.weights[q] * scale;
      for (int a = 0; a < nv; ++a) b.row(k[a]) += (w * rule.points[q][a]) * value.transpose();
    }
  }
  return b;
}

template <class Integrand>
NodalValues assemble_load(const Mesh& mesh, Integrand&& integrand) {
  return assemble_load(mesh, std::forward<Integrand>(integrand), default_rule(mesh.dim()));
}

}  // namespace sllbar
