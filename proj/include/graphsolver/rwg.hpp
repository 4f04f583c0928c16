#pragma once

#include "graphsolver/mesh.hpp"
#include "graphsolver/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace graphsolver::rwg {

inline constexpr std::uint32_t kNoBasis = 0xffffffffu;

/// One RWG function: the shared edge (v0 < v1), its plus/minus triangles and
/// the free vertices opposite the edge.
struct Basis {
  std::array<std::uint32_t, 2> edge;
  std::uint32_t plus_triangle;
  std::uint32_t minus_triangle;
  std::uint32_t plus_free_vertex;
  std::uint32_t minus_free_vertex;
  double length;
  double plus_area;
  double minus_area;
};

/// Per-triangle geometry and the (up to three) bases hosted on it. Slot k is
/// the edge opposite local vertex k.
struct TriangleInfo {
  std::array<Vec3, 3> vertices;
  std::array<std::uint32_t, 3> vertex_ids;
  Vec3 centroid;
  Vec3 normal;
  double area;
  std::array<std::uint32_t, 3> basis{kNoBasis, kNoBasis, kNoBasis};
  std::array<double, 3> sign{0.0, 0.0, 0.0};
};

struct RwgSet {
  std::vector<Basis> bases;
  std::vector<TriangleInfo> triangles;
  double mean_edge_length = 0.0;

  std::size_t size() const { return bases.size(); }
};

using CoefficientVector = CVector;

/// Bases over the interior edges of a closed oriented mesh, sorted
/// lexicographically by vertex pair; the lower triangle index is the plus side.
RwgSet build_rwg(const mesh::TriangleMesh& mesh);

/// f_n(p) on support triangle t, 1/m.
Vec3 eval_basis(const RwgSet& rwg, std::size_t n, std::size_t t, const Vec3& p);

/// Surface divergence of f_n on support triangle t.
double basis_divergence(const RwgSet& rwg, std::size_t n, std::size_t t);

/// J at each triangle centroid, A/m.
std::vector<CVec3> centroid_currents(const RwgSet& rwg, const CoefficientVector& u);

/// J on triangle t at point p (no support checks).
CVec3 current_at(const RwgSet& rwg, const CoefficientVector& u, std::size_t t, const Vec3& p);

}  // namespace graphsolver::rwg
