#include "graphsolver/graph.hpp"

#include <algorithm>
#include <numeric>

namespace graphsolver::graph {

std::string to_string(EdgeVectorMode mode) {
  return mode == EdgeVectorMode::centroid_displacement ? "centroid" : "midpoint";
}

EdgeVectorMode edge_vector_mode_from_string(const std::string& name) {
  if (name == "centroid") return EdgeVectorMode::centroid_displacement;
  if (name == "midpoint") return EdgeVectorMode::shared_edge_midpoint;
  throw InvalidArgument("unknown edge vector mode '" + name + "' (expected centroid or midpoint)");
}

CVec3 incident_current(const em::PlaneWave& pw, const Vec3& normal, const Vec3& r) {
  const em::IncidentField f = em::plane_wave_fields(pw, r);
  const CVec3 n = normal.cast<Complex>();
  return cross<Complex>(n, constants::z0 * f.h) - cross<Complex>(n, cross<Complex>(n, f.e));
}

GraphSample build_graph(const mesh::TriangleMesh& mesh, const rwg::RwgSet& rwg, const em::PlaneWave& pw,
                        EdgeVectorMode mode) {
  const auto report = mesh::validate_mesh(mesh);
  if (!report.is_closed) throw InvalidArgument("build_graph requires a closed mesh");
  if (rwg.triangles.size() != mesh.triangle_count()) throw InvalidArgument("RWG set does not belong to this mesh");
  pw.validate();

  GraphSample g;
  g.node_count = mesh.triangle_count();
  g.edge_mode = mode;
  g.meta.incidence = pw;
  g.meta.n_rwg = static_cast<std::uint32_t>(rwg.size());

  g.adjacency.reserve(rwg.size());
  for (const auto& b : rwg.bases) {
    g.adjacency.push_back({std::min(b.plus_triangle, b.minus_triangle), std::max(b.plus_triangle, b.minus_triangle)});
  }
  std::vector<std::size_t> order(rwg.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return g.adjacency[a] < g.adjacency[b]; });

  std::vector<std::array<std::uint32_t, 2>> sorted(rwg.size());
  g.edge_vectors.resize(static_cast<Eigen::Index>(2 * rwg.size()), 3);
  for (std::size_t e = 0; e < order.size(); ++e) {
    sorted[e] = g.adjacency[order[e]];
    const auto [i, j] = sorted[e];
    Vec3 forward, backward;
    if (mode == EdgeVectorMode::centroid_displacement) {
      forward = rwg.triangles[j].centroid - rwg.triangles[i].centroid;
      backward = -forward;
    } else {
      const auto& edge = rwg.bases[order[e]].edge;
      forward = 0.5 * (mesh.vertices[edge[0]] + mesh.vertices[edge[1]]);
      backward = forward;
    }
    g.edge_vectors.row(static_cast<Eigen::Index>(2 * e)) = forward.transpose();
    g.edge_vectors.row(static_cast<Eigen::Index>(2 * e + 1)) = backward.transpose();
  }
  g.adjacency = std::move(sorted);

  g.features.resize(static_cast<Eigen::Index>(g.node_count), kFeatureWidth);
  for (std::size_t t = 0; t < g.node_count; ++t) {
    const auto& tri = rwg.triangles[t];
    const CVec3 j = incident_current(pw, tri.normal, tri.centroid);
    const auto row = static_cast<Eigen::Index>(t);
    for (int c = 0; c < 3; ++c) {
      g.features(row, c) = j[c].real();
      g.features(row, 3 + c) = j[c].imag();
      g.features(row, 6 + c) = tri.centroid[c];
    }
  }
  return g;
}

RowMatrix currents_to_labels(const std::vector<CVec3>& currents) {
  RowMatrix labels(static_cast<Eigen::Index>(currents.size()), kLabelWidth);
  for (std::size_t i = 0; i < currents.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (int c = 0; c < 3; ++c) {
      labels(row, c) = currents[i][c].real();
      labels(row, 3 + c) = currents[i][c].imag();
    }
  }
  return labels;
}

std::vector<CVec3> labels_to_currents(const RowMatrix& labels) {
  if (labels.cols() != kLabelWidth) throw InvalidArgument("labels must have 6 columns");
  std::vector<CVec3> currents(static_cast<std::size_t>(labels.rows()));
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    for (int c = 0; c < 3; ++c) currents[static_cast<std::size_t>(i)][c] = Complex(labels(i, c), labels(i, 3 + c));
  }
  return currents;
}

GraphSample attach_labels(GraphSample g, const std::vector<CVec3>& currents) {
  if (currents.size() != g.node_count) {
    throw InvalidArgument("attach_labels: " + std::to_string(currents.size()) + " currents for " +
                          std::to_string(g.node_count) + " nodes");
  }
  g.labels = currents_to_labels(currents);
  return g;
}

std::vector<std::uint32_t> degrees(const GraphSample& g) {
  std::vector<std::uint32_t> deg(g.node_count, 0);
  for (const auto& [i, j] : g.adjacency) {
    ++deg[i];
    ++deg[j];
  }
  return deg;
}

GraphSample permute_nodes(const GraphSample& g, const std::vector<std::uint32_t>& perm) {
  if (perm.size() != g.node_count) throw InvalidArgument("permutation length does not match node count");
  std::vector<bool> seen(perm.size(), false);
  for (auto p : perm) {
    if (p >= perm.size() || seen[p]) throw InvalidArgument("not a permutation");
    seen[p] = true;
  }
  GraphSample out = g;
  const auto m = static_cast<Eigen::Index>(g.node_count);
  for (Eigen::Index i = 0; i < m; ++i) {
    out.features.row(perm[static_cast<std::size_t>(i)]) = g.features.row(i);
    if (g.labels) out.labels->row(perm[static_cast<std::size_t>(i)]) = g.labels->row(i);
  }
  // (new pair, forward row, backward row) re-sorted into canonical form
  struct Entry {
    std::array<std::uint32_t, 2> pair;
    Eigen::Index forward;
    Eigen::Index backward;
  };
  std::vector<Entry> entries;
  entries.reserve(g.adjacency.size());
  for (std::size_t e = 0; e < g.adjacency.size(); ++e) {
    const auto a = perm[g.adjacency[e][0]];
    const auto b = perm[g.adjacency[e][1]];
    const auto fwd = static_cast<Eigen::Index>(2 * e);
    if (a < b) {
      entries.push_back({{a, b}, fwd, fwd + 1});
    } else {
      entries.push_back({{b, a}, fwd + 1, fwd});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) { return x.pair < y.pair; });
  for (std::size_t e = 0; e < entries.size(); ++e) {
    out.adjacency[e] = entries[e].pair;
    out.edge_vectors.row(static_cast<Eigen::Index>(2 * e)) = g.edge_vectors.row(entries[e].forward);
    out.edge_vectors.row(static_cast<Eigen::Index>(2 * e + 1)) = g.edge_vectors.row(entries[e].backward);
  }
  return out;
}

}  // namespace graphsolver::graph
