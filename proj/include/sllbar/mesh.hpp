#pragma once

// Structured, nested P1 meshes of the unit interval and the unit square.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sllbar/errors.hpp"

namespace sllbar {

enum class MeshFamily { Interval, Square };

inline std::string to_string(MeshFamily family) {
  return family == MeshFamily::Interval ? "interval" : "square";
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Simplicial mesh of [0,1]^dim. Cells always store three vertex slots; in 1D
/// only the first two are used.
class Mesh {
public:
  using Cell = std::array<std::size_t, 3>;

  Mesh(MeshFamily family, int level, std::vector<Point> vertices, std::vector<Cell> cells)
      : family_(family), level_(level), vertices_(std::move(vertices)), cells_(std::move(cells)) {
    h_max_ = 0.0;
    h_min_ = INFINITY;
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      const double d = cell_diameter(c);
      h_max_ = std::max(h_max_, d);
      h_min_ = std::min(h_min_, d);
    }
  }

  MeshFamily family() const noexcept { return family_; }
  int dim() const noexcept { return family_ == MeshFamily::Interval ? 1 : 2; }
  int level() const noexcept { return level_; }
  /// Number of subdivisions per unit length, 2^level.
  std::size_t divisions() const noexcept { return std::size_t{1} << level_; }
  int vertices_per_cell() const noexcept { return dim() + 1; }

  std::size_t num_vertices() const noexcept { return vertices_.size(); }
  std::size_t num_cells() const noexcept { return cells_.size(); }
  std::span<const Point> vertices() const noexcept { return vertices_; }
  std::span<const Cell> cells() const noexcept { return cells_; }
  const Point& vertex(std::size_t i) const { return vertices_[i]; }
  const Cell& cell(std::size_t c) const { return cells_[c]; }

  double h_max() const noexcept { return h_max_; }
  double h_min() const noexcept { return h_min_; }

  /// Length (1D) or area (2D) of cell c.
  double cell_measure(std::size_t c) const {
    const Cell& k = cells_[c];
    const Point& a = vertices_[k[0]];
    const Point& b = vertices_[k[1]];
    if (dim() == 1) return std::abs(b.x - a.x);
    const Point& p = vertices_[k[2]];
    return 0.5 * std::abs((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y));
  }

  double cell_diameter(std::size_t c) const {
    const Cell& k = cells_[c];
    double d = 0.0;
    for (int i = 0; i < vertices_per_cell(); ++i) {
      for (int j = i + 1; j < vertices_per_cell(); ++j) {
        const Point& a = vertices_[k[i]];
        const Point& b = vertices_[k[j]];
        d = std::max(d, std::hypot(b.x - a.x, b.y - a.y));
      }
    }
    return d;
  }

private:
  MeshFamily family_;
  int level_;
  std::vector<Point> vertices_;
  std::vector<Cell> cells_;
  double h_max_;
  double h_min_;
};

inline void check_level(int level) {
  if (level < 0 || level > 24) throw InvalidArgument("mesh", "refinement level out of range");
}

/// Uniform mesh of [0,1] with 2^level cells; vertex i sits at i / 2^level.
inline Mesh build_interval_mesh(int level) {
  check_level(level);
  const std::size_t n = std::size_t{1} << level;
  std::vector<Point> vertices(n + 1);
  for (std::size_t i = 0; i <= n; ++i) vertices[i] = {static_cast<double>(i) / static_cast<double>(n), 0.0};
  std::vector<Mesh::Cell> cells(n);
  for (std::size_t i = 0; i < n; ++i) cells[i] = {i, i + 1, 0};
  return Mesh(MeshFamily::Interval, level, std::move(vertices), std::move(cells));
}

/// Structured triangulation of [0,1]^2: each of the (2^level)^2 squares is cut
/// along its lower-left to upper-right diagonal, at every level.
/// Vertex (i, j) has index j * (2^level + 1) + i.
inline Mesh build_square_mesh(int level) {
  check_level(level);
  const std::size_t n = std::size_t{1} << level;
  const std::size_t stride = n + 1;
  const double inv = 1.0 / static_cast<double>(n);
  std::vector<Point> vertices(stride * stride);
  for (std::size_t j = 0; j <= n; ++j)
    for (std::size_t i = 0; i <= n; ++i)
      vertices[j * stride + i] = {static_cast<double>(i) * inv, static_cast<double>(j) * inv};
  std::vector<Mesh::Cell> cells;
  cells.reserve(2 * n * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t v00 = j * stride + i;
      const std::size_t v10 = v00 + 1;
      const std::size_t v01 = v00 + stride;
      const std::size_t v11 = v01 + 1;
      cells.push_back({v00, v10, v11});  // below the diagonal
      cells.push_back({v00, v11, v01});  // above the diagonal
    }
  }
  return Mesh(MeshFamily::Square, level, std::move(vertices), std::move(cells));
}

inline Mesh build_mesh(MeshFamily family, int level) {
  return family == MeshFamily::Interval ? build_interval_mesh(level) : build_square_mesh(level);
}

/// For every fine vertex: the coarse cell containing it and the barycentric
/// weights of the coarse cell's vertices at that point. Zero weights are kept
/// as explicit zeros so that the layout is uniform.
struct ProlongationMap {
  struct Entry {
    std::size_t coarse_cell = 0;
    std::array<std::size_t, 3> coarse_vertices{};
    std::array<double, 3> weights{};
    int count = 0;
  };

  std::size_t num_coarse = 0;
  std::vector<Entry> entries;  // one per fine vertex
};

/// Builds the coarse-to-fine evaluation table for two meshes of the same
/// built-in family. All weights are dyadic rationals computed exactly, so a
/// fine vertex that coincides with a coarse vertex receives weight exactly 1.
inline ProlongationMap prolongation_map(const Mesh& coarse, const Mesh& fine) {
  if (coarse.family() != fine.family())
    throw MeshMismatch("prolongation between different mesh families (" + to_string(coarse.family()) +
                       " vs " + to_string(fine.family()) + ")");
  if (fine.level() < coarse.level())
    throw MeshMismatch("fine mesh level " + std::to_string(fine.level()) + " is coarser than level " +
                       std::to_string(coarse.level()));

  const std::size_t nc = coarse.divisions();
  const std::size_t nf = fine.divisions();
  const std::size_t ratio = nf / nc;
  const double inv_ratio = 1.0 / static_cast<double>(ratio);

  // Locate fine index I inside coarse cell index i with local coordinate a/ratio.
  auto locate = [&](std::size_t fine_index, std::size_t& cell_index, double& local) {
    cell_index = fine_index / ratio;
    std::size_t offset = fine_index % ratio;
    if (cell_index == nc) {
      cell_index = nc - 1;
      offset = ratio;
    }
    local = static_cast<double>(offset) * inv_ratio;
  };

  ProlongationMap map;
  map.num_coarse = coarse.num_vertices();
  map.entries.resize(fine.num_vertices());

  if (fine.family() == MeshFamily::Interval) {
    for (std::size_t I = 0; I <= nf; ++I) {
      std::size_t i;
      double s;
      locate(I, i, s);
      auto& e = map.entries[I];
      e.coarse_cell = i;
      e.coarse_vertices = {i, i + 1, 0};
      e.weights = {1.0 - s, s, 0.0};
      e.count = 2;
    }
    return map;
  }

  const std::size_t fstride = nf + 1;
  const std::size_t cstride = nc + 1;
  for (std::size_t J = 0; J <= nf; ++J) {
    for (std::size_t I = 0; I <= nf; ++I) {
      std::size_t i, j;
      double s, t;
      locate(I, i, s);
      locate(J, j, t);
      const std::size_t v00 = j * cstride + i;
      const std::size_t v10 = v00 + 1;
      const std::size_t v01 = v00 + cstride;
      const std::size_t v11 = v01 + 1;
      auto& e = map.entries[J * fstride + I];
      e.count = 3;
      if (s >= t) {
        e.coarse_cell = 2 * (j * nc + i);
        e.coarse_vertices = {v00, v10, v11};
        e.weights = {1.0 - s, s - t, t};
      } else {
        e.coarse_cell = 2 * (j * nc + i) + 1;
        e.coarse_vertices = {v00, v11, v01};
        e.weights = {1.0 - t, s, t - s};
      }
    }
  }
  return map;
}

}  // namespace sllbar
