#include "graphsolver/graph.hpp"

#include "detail/json_io.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace graphsolver::graph {

namespace {

using detail::json;

template <typename T>
void put(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.write(bytes, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  char bytes[sizeof(T)];
  if (!in.read(bytes, sizeof(T))) throw FormatError("truncated sample file");
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

void put_matrix(std::ostream& out, const RowMatrix& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

RowMatrix get_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  RowMatrix m(rows, cols);
  const auto bytes = static_cast<std::streamsize>(m.size() * sizeof(double));
  if (!in.read(reinterpret_cast<char*>(m.data()), bytes)) throw FormatError("truncated sample file");
  if (!m.allFinite()) throw FormatError("sample file holds non-finite values");
  return m;
}

// Guards allocation on corrupt headers.
constexpr std::uint32_t kMaxNodes = 1u << 24;

}  // namespace

std::string meta_to_json(const SampleMeta& meta) {
  json j;
  j["shape"] = meta.shape ? detail::shape_to_json(*meta.shape) : json(nullptr);
  j["mesh_density"] = meta.mesh_density;
  j["incidence"] = detail::plane_wave_to_json(meta.incidence);
  j["alpha"] = meta.alpha;
  j["residual"] = meta.residual;
  j["n_rwg"] = meta.n_rwg;
  return j.dump();
}

SampleMeta meta_from_json(const std::string& text) {
  SampleMeta meta;
  try {
    const json j = json::parse(text);
    if (!j.at("shape").is_null()) meta.shape = detail::shape_from_json(j.at("shape"));
    meta.mesh_density = j.at("mesh_density").get<double>();
    meta.incidence = detail::plane_wave_from_json(j.at("incidence"));
    meta.alpha = j.at("alpha").get<double>();
    meta.residual = j.at("residual").get<double>();
    meta.n_rwg = j.at("n_rwg").get<std::uint32_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed sample meta: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid sample meta: ") + e.what());
  }
  return meta;
}

void write_sample(std::ostream& out, const GraphSample& g) {
  const auto m = static_cast<Eigen::Index>(g.node_count);
  const auto e = static_cast<Eigen::Index>(g.adjacency.size());
  if (g.features.rows() != m || g.features.cols() != kFeatureWidth) throw InvalidArgument("features must be M x 9");
  if (g.edge_vectors.rows() != 2 * e || g.edge_vectors.cols() != 3) throw InvalidArgument("edge vectors must be 2E x 3");
  if (g.labels && (g.labels->rows() != m || g.labels->cols() != kLabelWidth)) {
    throw InvalidArgument("labels must be M x 6");
  }
  std::uint32_t flags = 0;
  if (g.labels) flags |= kFlagLabels;
  if (g.edge_mode == EdgeVectorMode::shared_edge_midpoint) flags |= kFlagMidpointEdges;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(e));
  put<std::uint32_t>(out, flags);
  for (const auto& [i, j] : g.adjacency) {
    put<std::uint32_t>(out, i);
    put<std::uint32_t>(out, j);
  }
  put_matrix(out, g.edge_vectors);
  put_matrix(out, g.features);
  if (g.labels) put_matrix(out, *g.labels);
  const std::string meta = meta_to_json(g.meta);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
}

GraphSample read_sample(std::istream& in) {
  GraphSample g;
  const auto m = get<std::uint32_t>(in);
  const auto e = get<std::uint32_t>(in);
  const auto flags = get<std::uint32_t>(in);
  if (m > kMaxNodes || e > 3 * kMaxNodes) throw FormatError("sample header declares an implausible size");
  if (flags & ~(kFlagLabels | kFlagMidpointEdges)) throw FormatError("sample header has unknown flag bits");
  g.node_count = m;
  g.edge_mode = (flags & kFlagMidpointEdges) ? EdgeVectorMode::shared_edge_midpoint
                                             : EdgeVectorMode::centroid_displacement;
  g.adjacency.resize(e);
  for (auto& pair : g.adjacency) {
    pair[0] = get<std::uint32_t>(in);
    pair[1] = get<std::uint32_t>(in);
    if (pair[0] >= pair[1] || pair[1] >= m) throw FormatError("sample adjacency entry out of range");
  }
  for (std::size_t k = 1; k < g.adjacency.size(); ++k) {
    if (!(g.adjacency[k - 1] < g.adjacency[k])) throw FormatError("sample adjacency is not sorted and unique");
  }
  g.edge_vectors = get_matrix(in, 2 * static_cast<Eigen::Index>(e), 3);
  g.features = get_matrix(in, m, kFeatureWidth);
  if (flags & kFlagLabels) g.labels = get_matrix(in, m, kLabelWidth);
  const auto meta_len = get<std::uint32_t>(in);
  if (meta_len > (1u << 20)) throw FormatError("sample meta block too large");
  std::string meta(meta_len, '\0');
  if (!in.read(meta.data(), meta_len)) throw FormatError("truncated sample meta");
  g.meta = meta_from_json(meta);
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after sample");
  return g;
}

void write_sample_file(const std::string& path, const GraphSample& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  write_sample(out, g);
  if (!out) throw FormatError("failed writing '" + path + "'");
}

GraphSample read_sample_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  try {
    return read_sample(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace graphsolver::graph
