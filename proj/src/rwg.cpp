#include "graphsolver/rwg.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace graphsolver::rwg {

RwgSet build_rwg(const mesh::TriangleMesh& mesh) {
  const auto report = mesh::validate_mesh(mesh);
  if (!report.is_closed || !report.is_oriented) {
    throw InvalidArgument("build_rwg requires a closed, consistently oriented mesh");
  }
  if (report.degenerate_count > 0) throw InvalidArgument("build_rwg: mesh has degenerate triangles");

  RwgSet rwg;
  rwg.triangles.resize(mesh.triangle_count());
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    auto& info = rwg.triangles[t];
    for (int k = 0; k < 3; ++k) {
      info.vertex_ids[k] = mesh.triangles[t][k];
      info.vertices[k] = mesh.vertices[mesh.triangles[t][k]];
    }
    info.centroid = mesh.centroid(t);
    const Vec3 an = mesh.area_normal(t);
    info.area = 0.5 * an.norm();
    info.normal = an / an.norm();
  }

  // (v_low, v_high, triangle, local slot)
  std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, int>> half;
  half.reserve(mesh.triangle_count() * 3);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      auto a = tri[(k + 1) % 3];
      auto b = tri[(k + 2) % 3];
      if (a > b) std::swap(a, b);
      half.emplace_back(a, b, static_cast<std::uint32_t>(t), k);
    }
  }
  std::sort(half.begin(), half.end());

  double edge_sum = 0.0;
  rwg.bases.reserve(half.size() / 2);
  for (std::size_t i = 0; i + 1 < half.size(); i += 2) {
    const auto& [a, b, t_lo, k_lo] = half[i];
    const auto& [a2, b2, t_hi, k_hi] = half[i + 1];
    Basis basis;
    basis.edge = {a, b};
    basis.plus_triangle = t_lo;
    basis.minus_triangle = t_hi;
    basis.plus_free_vertex = mesh.triangles[t_lo][k_lo];
    basis.minus_free_vertex = mesh.triangles[t_hi][k_hi];
    basis.length = (mesh.vertices[a] - mesh.vertices[b]).norm();
    basis.plus_area = rwg.triangles[t_lo].area;
    basis.minus_area = rwg.triangles[t_hi].area;
    const auto n = static_cast<std::uint32_t>(rwg.bases.size());
    rwg.triangles[t_lo].basis[k_lo] = n;
    rwg.triangles[t_lo].sign[k_lo] = 1.0;
    rwg.triangles[t_hi].basis[k_hi] = n;
    rwg.triangles[t_hi].sign[k_hi] = -1.0;
    edge_sum += basis.length;
    rwg.bases.push_back(basis);
  }
  rwg.mean_edge_length = rwg.bases.empty() ? 0.0 : edge_sum / static_cast<double>(rwg.bases.size());
  return rwg;
}

namespace {

int slot_of(const RwgSet& rwg, std::size_t n, std::size_t t) {
  if (n >= rwg.size()) throw InvalidArgument("basis index out of range");
  if (t >= rwg.triangles.size()) throw InvalidArgument("triangle index out of range");
  const auto& info = rwg.triangles[t];
  for (int k = 0; k < 3; ++k) {
    if (info.basis[k] == n) return k;
  }
  throw InvalidArgument("triangle " + std::to_string(t) + " does not support basis " + std::to_string(n));
}

}  // namespace

Vec3 eval_basis(const RwgSet& rwg, std::size_t n, std::size_t t, const Vec3& p) {
  const int k = slot_of(rwg, n, t);
  const auto& info = rwg.triangles[t];
  // barycentric coordinates of p, including its offset from the plane
  const Vec3 e1 = info.vertices[1] - info.vertices[0];
  const Vec3 e2 = info.vertices[2] - info.vertices[0];
  const Vec3 d = p - info.vertices[0];
  const double scale = std::max(e1.norm(), e2.norm());
  if (std::abs(d.dot(info.normal)) > 1e-9 * scale) throw InvalidArgument("point is off the triangle plane");
  const double g11 = e1.dot(e1), g12 = e1.dot(e2), g22 = e2.dot(e2);
  const double det = g11 * g22 - g12 * g12;
  const double l1 = (g22 * d.dot(e1) - g12 * d.dot(e2)) / det;
  const double l2 = (g11 * d.dot(e2) - g12 * d.dot(e1)) / det;
  const double l0 = 1.0 - l1 - l2;
  constexpr double tol = 1e-9;
  if (l0 < -tol || l1 < -tol || l2 < -tol) throw InvalidArgument("point lies outside the triangle");

  const auto& basis = rwg.bases[n];
  return info.sign[k] * basis.length / (2.0 * info.area) * (p - info.vertices[k]);
}

double basis_divergence(const RwgSet& rwg, std::size_t n, std::size_t t) {
  const int k = slot_of(rwg, n, t);
  const auto& info = rwg.triangles[t];
  return info.sign[k] * rwg.bases[n].length / info.area;
}

CVec3 current_at(const RwgSet& rwg, const CoefficientVector& u, std::size_t t, const Vec3& p) {
  const auto& info = rwg.triangles[t];
  CVec3 j = CVec3::Zero();
  for (int k = 0; k < 3; ++k) {
    const auto n = info.basis[k];
    if (n == kNoBasis) continue;
    const double c = info.sign[k] * rwg.bases[n].length / (2.0 * info.area);
    j += (u[n] * c) * (p - info.vertices[k]).cast<Complex>();
  }
  return j;
}

std::vector<CVec3> centroid_currents(const RwgSet& rwg, const CoefficientVector& u) {
  if (static_cast<std::size_t>(u.size()) != rwg.size()) {
    throw InvalidArgument("coefficient vector length " + std::to_string(u.size()) + " != basis count " +
                          std::to_string(rwg.size()));
  }
  std::vector<CVec3> out(rwg.triangles.size());
  for (std::size_t t = 0; t < rwg.triangles.size(); ++t) out[t] = current_at(rwg, u, t, rwg.triangles[t].centroid);
  return out;
}

}  // namespace graphsolver::rwg
