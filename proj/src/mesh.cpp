#include "graphsolver/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace graphsolver::mesh {

Vec3 TriangleMesh::centroid(std::size_t t) const {
  const auto& tri = triangles[t];
  return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
}

Vec3 TriangleMesh::area_normal(std::size_t t) const {
  const auto& tri = triangles[t];
  const Vec3& a = vertices[tri[0]];
  return (vertices[tri[1]] - a).cross(vertices[tri[2]] - a);
}

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

std::vector<std::array<std::uint32_t, 2>> unique_edges(const TriangleMesh& mesh) {
  std::vector<std::uint64_t> keys;
  keys.reserve(mesh.triangles.size() * 3);
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) keys.push_back(edge_key(tri[k], tri[(k + 1) % 3]));
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::vector<std::array<std::uint32_t, 2>> edges;
  edges.reserve(keys.size());
  for (auto key : keys) {
    edges.push_back({static_cast<std::uint32_t>(key >> 32), static_cast<std::uint32_t>(key & 0xffffffffu)});
  }
  return edges;
}

MeshReport validate_mesh(const TriangleMesh& mesh) {
  MeshReport report;
  report.triangle_count = mesh.triangles.size();
  report.vertex_count = mesh.vertices.size();

  // (undirected key, +1 for a<b traversal / -1 for a>b)
  std::vector<std::pair<std::uint64_t, int>> directed;
  directed.reserve(mesh.triangles.size() * 3);
  bool indices_ok = true;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] >= mesh.vertices.size()) indices_ok = false;
    }
    if (!indices_ok) continue;
    if (mesh.area(t) <= kMinTriangleArea) ++report.degenerate_count;
    for (int k = 0; k < 3; ++k) {
      const auto a = tri[k];
      const auto b = tri[(k + 1) % 3];
      directed.emplace_back(edge_key(a, b), a < b ? 1 : -1);
    }
  }
  if (!indices_ok) {
    return report;
  }
  std::sort(directed.begin(), directed.end());

  bool closed = !directed.empty();
  bool oriented = true;
  double min_len = std::numeric_limits<double>::infinity();
  double max_len = 0.0;
  double sum_len = 0.0;
  std::size_t edges = 0;
  for (std::size_t i = 0; i < directed.size();) {
    std::size_t j = i;
    int forward = 0;
    int backward = 0;
    while (j < directed.size() && directed[j].first == directed[i].first) {
      (directed[j].second > 0 ? forward : backward) += 1;
      ++j;
    }
    const std::size_t incident = j - i;
    if (incident != 2) closed = false;
    if (forward > 1 || backward > 1) oriented = false;
    const auto a = static_cast<std::uint32_t>(directed[i].first >> 32);
    const auto b = static_cast<std::uint32_t>(directed[i].first & 0xffffffffu);
    const double len = (mesh.vertices[a] - mesh.vertices[b]).norm();
    min_len = std::min(min_len, len);
    max_len = std::max(max_len, len);
    sum_len += len;
    ++edges;
    i = j;
  }
  report.is_closed = closed;
  report.is_oriented = oriented;
  report.edge_count = edges;
  report.min_edge_len = edges ? min_len : 0.0;
  report.max_edge_len = max_len;
  report.mean_edge_len = edges ? sum_len / static_cast<double>(edges) : 0.0;
  report.euler_characteristic = static_cast<long>(mesh.vertices.size()) - static_cast<long>(edges) +
                                static_cast<long>(mesh.triangles.size());
  return report;
}

// ---------------------------------------------------------------------------

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::spheroid:
      return "spheroid";
    case ShapeKind::conical_frustum:
      return "conical_frustum";
    case ShapeKind::hexahedron:
      return "hexahedron";
    case ShapeKind::missilehead:
      return "missilehead";
  }
  return "unknown";
}

ShapeKind shape_kind_from_string(const std::string& name) {
  if (name == "spheroid") return ShapeKind::spheroid;
  if (name == "conical_frustum" || name == "frustum") return ShapeKind::conical_frustum;
  if (name == "hexahedron") return ShapeKind::hexahedron;
  if (name == "missilehead") return ShapeKind::missilehead;
  throw InvalidArgument("unknown shape kind '" + name + "'");
}

const std::vector<std::string>& ShapeSpec::parameter_names(ShapeKind kind) {
  static const std::vector<std::string> spheroid{"Rx", "Ry", "Rz"};
  static const std::vector<std::string> frustum{"Rt", "Rz", "H"};
  static const std::vector<std::string> hexahedron{"Dt", "Wt", "Db", "Wb", "H"};
  static const std::vector<std::string> missilehead{"H", "R", "theta"};
  switch (kind) {
    case ShapeKind::spheroid:
      return spheroid;
    case ShapeKind::conical_frustum:
      return frustum;
    case ShapeKind::hexahedron:
      return hexahedron;
    case ShapeKind::missilehead:
      return missilehead;
  }
  return spheroid;
}

double ShapeSpec::at(const std::string& name) const {
  auto it = parameters.find(name);
  if (it == parameters.end()) {
    throw InvalidArgument(to_string(kind) + ": missing parameter '" + name + "'");
  }
  return it->second;
}

void ShapeSpec::validate() const {
  const auto& names = parameter_names(kind);
  for (const auto& [name, value] : parameters) {
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw InvalidArgument(to_string(kind) + ": unknown parameter '" + name + "'");
    }
    if (!std::isfinite(value)) throw InvalidArgument(to_string(kind) + ": non-finite '" + name + "'");
  }
  for (const auto& name : names) {
    const double value = at(name);
    if (kind == ShapeKind::missilehead && name == "theta") {
      if (!(value > 0.0 && value < 90.0)) {
        throw InvalidArgument("missilehead: theta must lie in (0, 90) degrees");
      }
    } else if (!(value > 0.0)) {
      throw InvalidArgument(to_string(kind) + ": length '" + name + "' must be > 0");
    }
  }
  if (kind == ShapeKind::missilehead) {
    const double cone_height = at("R") * std::tan(at("theta") * constants::pi / 180.0);
    if (!(at("H") > cone_height)) {
      throw InvalidArgument("missilehead: H must exceed the nose height R*tan(theta)");
    }
  }
}

std::string ShapeSpec::describe() const {
  std::ostringstream os;
  os << to_string(kind);
  for (const auto& name : parameter_names(kind)) {
    auto it = parameters.find(name);
    if (it != parameters.end()) os << ' ' << name << '=' << it->second;
  }
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void obj_error(std::size_t line_no, const std::string& what) {
  throw FormatError("obj line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

TriangleMesh import_obj(std::istream& in) {
  TriangleMesh mesh;
  std::vector<std::array<long long, 3>> raw_faces;
  std::vector<std::size_t> face_lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) obj_error(line_no, "malformed vertex record");
      std::string extra;
      // an optional homogeneous w is tolerated, anything else is not
      if (ls >> extra) {
        std::string more;
        if (ls >> more) obj_error(line_no, "malformed vertex record");
      }
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<long long> ids;
      std::string token;
      while (ls >> token) {
        const std::string head = token.substr(0, token.find('/'));
        std::size_t used = 0;
        long long id = 0;
        try {
          id = std::stoll(head, &used);
        } catch (const std::exception&) {
          obj_error(line_no, "malformed face index '" + token + "'");
        }
        if (used != head.size()) obj_error(line_no, "malformed face index '" + token + "'");
        ids.push_back(id);
      }
      if (ids.size() < 3) obj_error(line_no, "malformed face record");
      if (ids.size() != 3) obj_error(line_no, "non-triangular face");
      raw_faces.push_back({ids[0], ids[1], ids[2]});
      face_lines.push_back(line_no);
    } else if (tag == "vn" || tag == "vt" || tag == "o" || tag == "g" || tag == "s" || tag == "usemtl" ||
               tag == "mtllib") {
      continue;
    } else {
      obj_error(line_no, "unsupported record '" + tag + "'");
    }
  }
  const auto n = static_cast<long long>(mesh.vertices.size());
  mesh.triangles.reserve(raw_faces.size());
  for (std::size_t f = 0; f < raw_faces.size(); ++f) {
    Triangle tri{};
    for (int k = 0; k < 3; ++k) {
      const long long id = raw_faces[f][k];
      if (id < 1 || id > n) obj_error(face_lines[f], "face index out of range");
      tri[k] = static_cast<std::uint32_t>(id - 1);
    }
    mesh.triangles.push_back(tri);
  }
  return mesh;
}

TriangleMesh import_obj_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open mesh file '" + path + "'");
  return import_obj(in);
}

void export_obj(const TriangleMesh& mesh, std::ostream& out) {
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

void export_obj_file(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write mesh file '" + path + "'");
  export_obj(mesh, out);
}

TriangleMesh permute_triangles(const TriangleMesh& mesh, const std::vector<std::size_t>& order) {
  if (order.size() != mesh.triangles.size()) throw InvalidArgument("permutation length mismatch");
  TriangleMesh out;
  out.vertices = mesh.vertices;
  out.triangles.reserve(order.size());
  for (auto index : order) out.triangles.push_back(mesh.triangles.at(index));
  return out;
}

}  // namespace graphsolver::mesh
