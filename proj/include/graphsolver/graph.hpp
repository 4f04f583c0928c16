#pragma once

#include "graphsolver/em.hpp"
#include "graphsolver/mesh.hpp"
#include "graphsolver/rwg.hpp"
#include "graphsolver/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace graphsolver::graph {

inline constexpr int kFeatureWidth = 9;
inline constexpr int kLabelWidth = 6;

/// How r_e is formed for a directed pair i -> j.
enum class EdgeVectorMode {
  centroid_displacement,  // centroid(j) - centroid(i)
  shared_edge_midpoint,   // midpoint of the shared side, relative to the origin
};

std::string to_string(EdgeVectorMode mode);
EdgeVectorMode edge_vector_mode_from_string(const std::string& name);

/// Provenance carried with each sample.
struct SampleMeta {
  std::optional<mesh::ShapeSpec> shape;
  double mesh_density = 0.1;  // target edge in wavelengths used to mesh `shape`
  em::PlaneWave incidence;
  double alpha = 0.5;
  double residual = 0.0;
  std::uint32_t n_rwg = 0;
};

struct GraphSample {
  std::size_t node_count = 0;
  /// Undirected pairs (i < j) in lexicographic order.
  std::vector<std::array<std::uint32_t, 2>> adjacency;
  /// Row 2e is r_e(i -> j) and row 2e + 1 is r_e(j -> i) for adjacency[e] = (i, j).
  RowMatrix edge_vectors;
  /// M x 9: [Re J_inc (x, y, z), Im J_inc (x, y, z), centroid].
  RowMatrix features;
  /// M x 6: [Re Jx, Re Jy, Re Jz, Im Jx, Im Jy, Im Jz].
  std::optional<RowMatrix> labels;
  EdgeVectorMode edge_mode = EdgeVectorMode::centroid_displacement;
  SampleMeta meta;

  std::size_t edge_count() const { return adjacency.size(); }
  bool has_labels() const { return labels.has_value(); }
};

/// Equivalent surface current n x Z0 H - n x (n x E) at a point with unit normal n.
CVec3 incident_current(const em::PlaneWave& pw, const Vec3& normal, const Vec3& r);

/// Triangles become nodes, shared sides become edges.
GraphSample build_graph(const mesh::TriangleMesh& mesh, const rwg::RwgSet& rwg, const em::PlaneWave& pw,
                        EdgeVectorMode mode = EdgeVectorMode::centroid_displacement);

GraphSample attach_labels(GraphSample g, const std::vector<CVec3>& currents);

std::vector<CVec3> labels_to_currents(const RowMatrix& labels);
RowMatrix currents_to_labels(const std::vector<CVec3>& currents);

/// Node degrees from the adjacency list.
std::vector<std::uint32_t> degrees(const GraphSample& g);

/// Relabels nodes: new node perm[i] takes the role of old node i.
GraphSample permute_nodes(const GraphSample& g, const std::vector<std::uint32_t>& perm);

// ---------------------------------------------------------------- storage

inline constexpr std::uint32_t kFlagLabels = 1u << 0;
inline constexpr std::uint32_t kFlagMidpointEdges = 1u << 1;

/// Little-endian layout:
///   u32 M, u32 E, u32 flags
///   E x (u32 i, u32 j)
///   2E x 3 f64 edge vectors
///   M x 9 f64 features
///   M x 6 f64 labels           (flags bit 0)
///   u32 byte length + UTF-8 JSON meta
void write_sample(std::ostream& out, const GraphSample& g);
GraphSample read_sample(std::istream& in);
void write_sample_file(const std::string& path, const GraphSample& g);
GraphSample read_sample_file(const std::string& path);

std::string meta_to_json(const SampleMeta& meta);
SampleMeta meta_from_json(const std::string& text);

}  // namespace graphsolver::graph
