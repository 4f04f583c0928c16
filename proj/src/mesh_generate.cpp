#include "graphsolver/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace graphsolver::mesh {

namespace {

constexpr double kPi = constants::pi;

void check_budget(std::size_t triangles, const GenerateOptions& options) {
  if (triangles > options.max_triangles) {
    throw InvalidArgument("mesh would need " + std::to_string(triangles) + " triangles, above the cap of " +
                          std::to_string(options.max_triangles));
  }
}

// ---------------------------------------------------------------- spheroid

/// Class-I geodesic sphere with `frequency` segments per icosahedron edge.
TriangleMesh icosphere(int frequency) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> corners = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
      {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  const std::vector<Triangle> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& c : corners) c.normalize();

  TriangleMesh mesh;
  std::map<std::array<long long, 3>, std::uint32_t> index;
  auto vertex_id = [&](const Vec3& raw) {
    const Vec3 p = raw.normalized();
    const std::array<long long, 3> key{std::llround(p.x() * 1e10), std::llround(p.y() * 1e10),
                                       std::llround(p.z() * 1e10)};
    auto [it, inserted] = index.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
    if (inserted) mesh.vertices.push_back(p);
    return it->second;
  };

  const int n = frequency;
  for (const auto& f : faces) {
    const Vec3& a = corners[f[0]];
    const Vec3& b = corners[f[1]];
    const Vec3& c = corners[f[2]];
    // grid point (i, j): a + i/n (b - a) + j/n (c - a), i + j <= n
    std::vector<std::vector<std::uint32_t>> ids(n + 1);
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n - i; ++j) {
        const double wi = static_cast<double>(i) / n;
        const double wj = static_cast<double>(j) / n;
        ids[i].push_back(vertex_id((1.0 - wi - wj) * a + wi * b + wj * c));
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n - i; ++j) {
        mesh.triangles.push_back({ids[i][j], ids[i + 1][j], ids[i][j + 1]});
        if (j + 1 < n - i) mesh.triangles.push_back({ids[i + 1][j], ids[i + 1][j + 1], ids[i][j + 1]});
      }
    }
  }
  return mesh;
}

TriangleMesh spheroid_mesh(double rx, double ry, double rz, int frequency) {
  TriangleMesh mesh = icosphere(frequency);
  for (auto& v : mesh.vertices) v = Vec3(v.x() * rx, v.y() * ry, v.z() * rz);
  return mesh;
}

// -------------------------------------------------------- body of revolution

struct ProfilePoint {
  double r;
  double z;
};

/// Rotates a profile polyline (first and last points on the axis) about z.
/// `spacing` is the nominal edge length along the profile and the rings.
TriangleMesh revolve(const std::vector<ProfilePoint>& profile, double spacing, const GenerateOptions& options) {
  // resample every segment
  std::vector<ProfilePoint> samples{profile.front()};
  for (std::size_t s = 0; s + 1 < profile.size(); ++s) {
    const auto& p0 = profile[s];
    const auto& p1 = profile[s + 1];
    const double len = std::hypot(p1.r - p0.r, p1.z - p0.z);
    const int pieces = std::max(1, static_cast<int>(std::lround(len / spacing)));
    for (int k = 1; k <= pieces; ++k) {
      const double w = static_cast<double>(k) / pieces;
      samples.push_back({p0.r + w * (p1.r - p0.r), p0.z + w * (p1.z - p0.z)});
    }
  }
  samples.front().r = 0.0;
  samples.back().r = 0.0;

  std::size_t estimate = 0;
  std::vector<int> counts;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool pole = (i == 0 || i + 1 == samples.size());
    const int count = pole ? 1 : std::max(3, static_cast<int>(std::lround(2.0 * kPi * samples[i].r / spacing)));
    counts.push_back(count);
    estimate += 2 * static_cast<std::size_t>(count);
  }
  check_budget(estimate, options);

  TriangleMesh mesh;
  std::vector<std::uint32_t> ring_start;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ring_start.push_back(static_cast<std::uint32_t>(mesh.vertices.size()));
    if (counts[i] == 1) {
      mesh.vertices.emplace_back(0.0, 0.0, samples[i].z);
      continue;
    }
    for (int k = 0; k < counts[i]; ++k) {
      const double angle = 2.0 * kPi * k / counts[i];
      mesh.vertices.emplace_back(samples[i].r * std::cos(angle), samples[i].r * std::sin(angle), samples[i].z);
    }
  }

  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const int na = counts[i];
    const int nb = counts[i + 1];
    const std::uint32_t a0 = ring_start[i];
    const std::uint32_t b0 = ring_start[i + 1];
    auto A = [&](int k) { return a0 + static_cast<std::uint32_t>(k % na); };
    auto B = [&](int k) { return b0 + static_cast<std::uint32_t>(k % nb); };
    if (na == 1) {
      for (int j = 0; j < nb; ++j) mesh.triangles.push_back({a0, B(j + 1), B(j)});
      continue;
    }
    if (nb == 1) {
      for (int k = 0; k < na; ++k) mesh.triangles.push_back({A(k), A(k + 1), b0});
      continue;
    }
    // zipper: advance on whichever ring has the smaller next angle
    int ia = 0;
    int ib = 0;
    while (ia < na || ib < nb) {
      const double next_a = static_cast<double>(ia + 1) / na;
      const double next_b = static_cast<double>(ib + 1) / nb;
      if (ib == nb || (ia < na && next_a <= next_b)) {
        mesh.triangles.push_back({A(ia), A(ia + 1), B(ib)});
        ++ia;
      } else {
        mesh.triangles.push_back({A(ia), B(ib + 1), B(ib)});
        ++ib;
      }
    }
  }
  return mesh;
}

// --------------------------------------------------------------- hexahedron

/// Rectangular frustum: base Db x Wb at z = 0, top Dt x Wt at z = H, both
/// centered on the z axis. Boundary lattice points map to unique positions.
TriangleMesh box_frustum(double dt, double wt, double db, double wb, double height, double spacing,
                         const GenerateOptions& options) {
  const double slant_x = std::hypot(0.5 * (db - dt), height);
  const double slant_y = std::hypot(0.5 * (wb - wt), height);
  const int nx = std::max(1, static_cast<int>(std::lround(std::max(dt, db) / spacing)));
  const int ny = std::max(1, static_cast<int>(std::lround(std::max(wt, wb) / spacing)));
  const int nz = std::max(1, static_cast<int>(std::lround(std::max(slant_x, slant_y) / spacing)));
  check_budget(4 * static_cast<std::size_t>(nx * ny + nx * nz + ny * nz), options);

  TriangleMesh mesh;
  std::map<std::array<int, 3>, std::uint32_t> index;
  auto vertex = [&](int i, int j, int k) {
    auto [it, inserted] = index.try_emplace({i, j, k}, static_cast<std::uint32_t>(mesh.vertices.size()));
    if (inserted) {
      const double t = static_cast<double>(k) / nz;
      const double depth = db + (dt - db) * t;
      const double width = wb + (wt - wb) * t;
      mesh.vertices.emplace_back((static_cast<double>(i) / nx - 0.5) * depth,
                                 (static_cast<double>(j) / ny - 0.5) * width, height * t);
    }
    return it->second;
  };

  const Vec3 center(0.0, 0.0, 0.5 * height);
  auto emit = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    const Vec3 n = (mesh.vertices[b] - mesh.vertices[a]).cross(mesh.vertices[c] - mesh.vertices[a]);
    const Vec3 mid = (mesh.vertices[a] + mesh.vertices[b] + mesh.vertices[c]) / 3.0;
    if (n.dot(mid - center) < 0.0) std::swap(b, c);
    mesh.triangles.push_back({a, b, c});
  };
  // face given by a fixed lattice axis/value and two running axes
  auto face = [&](int fixed_axis, int fixed_value) {
    const int dims[3] = {nx, ny, nz};
    const int u_axis = (fixed_axis + 1) % 3;
    const int v_axis = (fixed_axis + 2) % 3;
    for (int u = 0; u < dims[u_axis]; ++u) {
      for (int v = 0; v < dims[v_axis]; ++v) {
        auto at = [&](int du, int dv) {
          int c[3];
          c[fixed_axis] = fixed_value;
          c[u_axis] = u + du;
          c[v_axis] = v + dv;
          return vertex(c[0], c[1], c[2]);
        };
        const auto p00 = at(0, 0);
        const auto p10 = at(1, 0);
        const auto p01 = at(0, 1);
        const auto p11 = at(1, 1);
        emit(p00, p10, p11);
        emit(p00, p11, p01);
      }
    }
  };
  face(0, 0);
  face(0, nx);
  face(1, 0);
  face(1, ny);
  face(2, 0);
  face(2, nz);
  return mesh;
}

/// Generates with a nominal spacing and corrects it until the measured mean
/// edge length matches the target.
TriangleMesh calibrated(const std::function<TriangleMesh(double)>& build, double target) {
  double spacing = target;
  TriangleMesh mesh = build(spacing);
  double best_error = std::abs(validate_mesh(mesh).mean_edge_len / target - 1.0);
  for (int iter = 0; iter < 4 && best_error > 0.05; ++iter) {
    const double mean = validate_mesh(mesh).mean_edge_len;
    spacing *= target / mean;
    TriangleMesh candidate = build(spacing);
    const double error = std::abs(validate_mesh(candidate).mean_edge_len / target - 1.0);
    if (error < best_error) {
      best_error = error;
      mesh = std::move(candidate);
    }
  }
  return mesh;
}

}  // namespace

TriangleMesh generate_primitive(const ShapeSpec& spec, double target_edge, double wavelength,
                                const GenerateOptions& options) {
  spec.validate();
  if (!(target_edge > 0.0 && target_edge <= 0.5)) {
    throw InvalidArgument("target edge must lie in (0, 0.5] wavelengths");
  }
  if (!(wavelength > 0.0)) throw InvalidArgument("wavelength must be > 0");
  const double target = target_edge * wavelength;

  switch (spec.kind) {
    case ShapeKind::spheroid: {
      const double rx = spec.at("Rx");
      const double ry = spec.at("Ry");
      const double rz = spec.at("Rz");
      // mean edge falls roughly as 1/frequency; scan and keep the closest
      TriangleMesh best;
      double best_error = std::numeric_limits<double>::infinity();
      for (int n = 1;; ++n) {
        check_budget(20 * static_cast<std::size_t>(n) * n, options);
        TriangleMesh mesh = spheroid_mesh(rx, ry, rz, n);
        const double mean = validate_mesh(mesh).mean_edge_len;
        const double error = std::abs(std::log(mean / target));
        if (error < best_error) {
          best_error = error;
          best = std::move(mesh);
        }
        if (mean <= target) break;
      }
      return best;
    }
    case ShapeKind::conical_frustum: {
      const double rt = spec.at("Rt");
      const double rb = spec.at("Rz");
      const double h = spec.at("H");
      const std::vector<ProfilePoint> profile{{0.0, 0.0}, {rb, 0.0}, {rt, h}, {0.0, h}};
      return calibrated([&](double s) { return revolve(profile, s, options); }, target);
    }
    case ShapeKind::hexahedron: {
      return calibrated(
          [&](double s) {
            return box_frustum(spec.at("Dt"), spec.at("Wt"), spec.at("Db"), spec.at("Wb"), spec.at("H"), s, options);
          },
          target);
    }
    case ShapeKind::missilehead: {
      const double h = spec.at("H");
      const double r = spec.at("R");
      const double nose = r * std::tan(spec.at("theta") * kPi / 180.0);
      const std::vector<ProfilePoint> profile{{0.0, 0.0}, {r, 0.0}, {r, h - nose}, {0.0, h}};
      return calibrated([&](double s) { return revolve(profile, s, options); }, target);
    }
  }
  throw InvalidArgument("unsupported shape kind");
}

}  // namespace graphsolver::mesh
