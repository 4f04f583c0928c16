#pragma once

#include "graphsolver/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace graphsolver::mesh {

using Triangle = std::array<std::uint32_t, 3>;

/// Triangulated surface. Triangles are counterclockwise seen from outside.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }

  Vec3 centroid(std::size_t t) const;
  /// Unnormalized normal, |n| = 2 * area.
  Vec3 area_normal(std::size_t t) const;
  double area(std::size_t t) const { return 0.5 * area_normal(t).norm(); }
  Vec3 unit_normal(std::size_t t) const { return area_normal(t).normalized(); }
};

struct MeshReport {
  bool is_closed = false;
  bool is_oriented = false;
  long euler_characteristic = 0;
  double max_edge_len = 0.0;
  double min_edge_len = 0.0;
  double mean_edge_len = 0.0;
  std::size_t triangle_count = 0;
  std::size_t vertex_count = 0;
  std::size_t edge_count = 0;
  std::size_t degenerate_count = 0;

  /// Closed, consistently oriented, genus 0, no slivers below the area floor.
  bool watertight_genus0() const {
    return is_closed && is_oriented && euler_characteristic == 2 && degenerate_count == 0;
  }
};

inline constexpr double kMinTriangleArea = 1e-12;

MeshReport validate_mesh(const TriangleMesh& mesh);

/// Unique undirected edges as sorted vertex pairs, in lexicographic order.
std::vector<std::array<std::uint32_t, 2>> unique_edges(const TriangleMesh& mesh);

// ---------------------------------------------------------------------------
// Parametric target families

enum class ShapeKind { spheroid, conical_frustum, hexahedron, missilehead };

std::string to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(const std::string& name);

/// Named parameters per family (meters, degrees for missilehead theta):
///   spheroid         Rx Ry Rz
///   conical_frustum  Rt Rz H      (Rt top radius, Rz base radius)
///   hexahedron       Dt Wt Db Wb H
///   missilehead      H R theta
struct ShapeSpec {
  ShapeKind kind = ShapeKind::spheroid;
  std::map<std::string, double> parameters;

  double at(const std::string& name) const;
  /// Required parameter names for the family, in canonical order.
  static const std::vector<std::string>& parameter_names(ShapeKind kind);
  /// Throws InvalidArgument when a parameter is missing, unknown or out of range.
  void validate() const;
  std::string describe() const;
};

struct GenerateOptions {
  std::size_t max_triangles = 200000;
};

/// Closed oriented mesh of the shape with mean edge length near
/// target_edge * wavelength. Spheroid body centers and the base centers of
/// the other families sit at the origin; axes of revolution are along z.
TriangleMesh generate_primitive(const ShapeSpec& spec, double target_edge, double wavelength,
                                const GenerateOptions& options = {});

// ---------------------------------------------------------------------------
// Wavefront OBJ subset: `v x y z` and triangular `f a b c` records.

TriangleMesh import_obj(std::istream& in);
TriangleMesh import_obj_file(const std::string& path);
void export_obj(const TriangleMesh& mesh, std::ostream& out);
void export_obj_file(const TriangleMesh& mesh, const std::string& path);

/// Copy of the mesh with triangles reordered so that new[i] = old[order[i]].
TriangleMesh permute_triangles(const TriangleMesh& mesh, const std::vector<std::size_t>& order);

}  // namespace graphsolver::mesh
