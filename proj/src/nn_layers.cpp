#include "detail/nn_ops.hpp"

#include <algorithm>

namespace graphsolver::nn {

// ---------------------------------------------------------------- topology

Topology make_topology(const std::vector<const graph::GraphSample*>& batch) {
  Topology topo;
  topo.graph_offsets.push_back(0);
  for (const auto* g : batch) {
    if (g->features.rows() != static_cast<Eigen::Index>(g->node_count)) {
      throw InvalidArgument("sample feature rows do not match its node count");
    }
    if (g->edge_vectors.rows() != static_cast<Eigen::Index>(2 * g->adjacency.size())) {
      throw InvalidArgument("sample edge vectors do not match its adjacency");
    }
    topo.nodes += g->node_count;
    topo.graph_offsets.push_back(topo.nodes);
  }
  // Entries sorted by (target, source); each undirected pair contributes two.
  struct Entry {
    std::uint32_t target;
    std::uint32_t source;
    std::size_t graph;
    Eigen::Index row;
  };
  std::vector<Entry> entries;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto* g = batch[b];
    const auto base = static_cast<std::uint32_t>(topo.graph_offsets[b]);
    for (std::size_t e = 0; e < g->adjacency.size(); ++e) {
      const auto [i, j] = g->adjacency[e];
      if (i >= g->node_count || j >= g->node_count) {
        throw InvalidArgument("adjacency entry (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") references a node outside the graph");
      }
      entries.push_back({base + i, base + j, b, static_cast<Eigen::Index>(2 * e)});
      entries.push_back({base + j, base + i, b, static_cast<Eigen::Index>(2 * e + 1)});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.target != b.target ? a.target < b.target : a.source < b.source;
  });

  const std::size_t n_entries = entries.size();
  topo.offsets.assign(topo.nodes + 1, 0);
  topo.target.resize(n_entries);
  topo.source.resize(n_entries);
  topo.edge_vectors.resize(static_cast<Eigen::Index>(n_entries), 3);
  for (std::size_t k = 0; k < n_entries; ++k) {
    topo.target[k] = entries[k].target;
    topo.source[k] = entries[k].source;
    topo.edge_vectors.row(static_cast<Eigen::Index>(k)) = batch[entries[k].graph]->edge_vectors.row(entries[k].row);
    ++topo.offsets[entries[k].target + 1];
  }
  for (std::size_t i = 0; i < topo.nodes; ++i) topo.offsets[i + 1] += topo.offsets[i];

  topo.source_offsets.assign(topo.nodes + 1, 0);
  for (auto s : topo.source) ++topo.source_offsets[s + 1];
  for (std::size_t i = 0; i < topo.nodes; ++i) topo.source_offsets[i + 1] += topo.source_offsets[i];
  topo.by_source.resize(n_entries);
  std::vector<std::uint32_t> fill(topo.source_offsets.begin(), topo.source_offsets.end() - 1);
  for (std::size_t k = 0; k < n_entries; ++k) topo.by_source[fill[topo.source[k]]++] = static_cast<std::uint32_t>(k);
  return topo;
}

Topology make_topology(const graph::GraphSample& g) { return make_topology(std::vector<const graph::GraphSample*>{&g}); }

RowMatrix stack_features(const std::vector<const graph::GraphSample*>& batch) {
  Eigen::Index rows = 0;
  for (const auto* g : batch) rows += g->features.rows();
  RowMatrix out(rows, graph::kFeatureWidth);
  Eigen::Index at = 0;
  for (const auto* g : batch) {
    out.middleRows(at, g->features.rows()) = g->features;
    at += g->features.rows();
  }
  return out;
}

RowMatrix stack_labels(const std::vector<const graph::GraphSample*>& batch) {
  Eigen::Index rows = 0;
  for (const auto* g : batch) {
    if (!g->labels) throw InvalidArgument("sample has no labels");
    rows += g->labels->rows();
  }
  RowMatrix out(rows, graph::kLabelWidth);
  Eigen::Index at = 0;
  for (const auto* g : batch) {
    out.middleRows(at, g->labels->rows()) = *g->labels;
    at += g->labels->rows();
  }
  return out;
}

// ---------------------------------------------------------------- elementwise

RowMatrix prelu(const RowMatrix& x, double slope) { return detail::prelu_as<double>(x, slope); }

namespace detail {

void dense_backward(const RowMatrix& x, ConstMatrixRef w, const RowMatrix& dy, MatrixRef dw, MatrixRef db,
                    RowMatrix* dx) {
  dw.noalias() += x.transpose() * dy;
  db.row(0) += dy.colwise().sum();
  if (dx) *dx = dy * w.transpose();
}

RowMatrix prelu_backward(const RowMatrix& pre, double slope, const RowMatrix& dy, double& dslope) {
  RowMatrix dx(pre.rows(), pre.cols());
  double ds = 0.0;
  for (Eigen::Index i = 0; i < pre.size(); ++i) {
    const double p = pre.data()[i];
    const double g = dy.data()[i];
    if (p > 0.0) {
      dx.data()[i] = g;
    } else {
      dx.data()[i] = slope * g;
      ds += g * p;
    }
  }
  dslope += ds;
  return dx;
}

ConvGrad conv_backward(ConstMatrixRef w, const FoldedKernel<double>& kernel, const Topology& topo, const RowMatrix& f,
                       const RowMatrix& h, const RowMatrix& g) {
  const Eigen::Index m = f.rows();
  const Eigen::Index c = f.cols();
  const Eigen::Index kh = h.cols();
  ConvGrad out;
  out.dw = g.transpose() * f;
  out.df = g * w;
  out.dwc = RowMatrix::Zero(c, kh * c);
  out.dbc = RowMatrix::Zero(c, c);
  out.dh = RowMatrix::Zero(h.rows(), kh);
  if (topo.entry_count() == 0) return out;

  // dL/d(message) of every entry
  RowMatrix ge(static_cast<Eigen::Index>(topo.entry_count()), c);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto deg = topo.offsets[i + 1] - topo.offsets[i];
    for (auto e = topo.offsets[i]; e < topo.offsets[i + 1]; ++e) ge.row(e) = g.row(i) / static_cast<double>(deg);
  }
  RowMatrix dq = RowMatrix::Zero(m, c);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (auto k = topo.source_offsets[j]; k < topo.source_offsets[j + 1]; ++k) dq.row(j) += ge.row(topo.by_source[k]);
  }
  out.dbc = f.transpose() * dq;
  out.df.noalias() += dq * kernel.bc.transpose();

  const Eigen::Index step = chunk_rows(kh * c);
  for (Eigen::Index a = 0; a < m; a += step) {
    const Eigen::Index n = std::min(step, m - a);
    const RowMatrix t = f.middleRows(a, n) * kernel.wc;
    RowMatrix s = RowMatrix::Zero(n, kh * c);
    for (Eigen::Index j = a; j < a + n; ++j) {
      const Eigen::Map<const RowMatrix> tj(t.row(j - a).data(), kh, c);
      Eigen::Map<RowMatrix> sj(s.row(j - a).data(), kh, c);
      for (auto k = topo.source_offsets[j]; k < topo.source_offsets[j + 1]; ++k) {
        const auto e = topo.by_source[k];
        sj.noalias() += h.row(e).transpose() * ge.row(e);
        out.dh.row(e).noalias() = ge.row(e) * tj.transpose();
      }
    }
    out.dwc.noalias() += f.middleRows(a, n).transpose() * s;
    out.df.middleRows(a, n).noalias() += s * kernel.wc.transpose();
  }
  return out;
}

}  // namespace detail

RowMatrix kernel_fcn(const ParamSet& params, const ModelConfig& cfg, int layer, const Vec3& r_e) {
  if (layer < 0 || layer >= cfg.gcn_layers) throw InvalidArgument("GCN layer index out of range");
  const RowMatrix h = detail::kernel_hidden<double>(params, cfg, layer, RowMatrix(r_e.transpose()), nullptr);
  const std::string name = detail::layer_prefix(layer) + ".kernel." + std::to_string(cfg.kernel_layers);
  const RowMatrix flat = detail::dense_forward<double>(h, params, name);
  if (flat.cols() != static_cast<Eigen::Index>(cfg.hidden) * cfg.hidden) {
    throw InvalidArgument("kernel output width must be hidden^2");
  }
  return Eigen::Map<const RowMatrix>(flat.data(), cfg.hidden, cfg.hidden);
}

RowMatrix graph_conv(const ParamSet& params, const ModelConfig& cfg, int layer, const Topology& topo,
                     const RowMatrix& features) {
  if (layer < 0 || layer >= cfg.gcn_layers) throw InvalidArgument("GCN layer index out of range");
  if (features.cols() != cfg.hidden) throw InvalidArgument("graph_conv expects hidden-width features");
  const RowMatrix h = detail::kernel_hidden<double>(params, cfg, layer, topo.edge_vectors, nullptr);
  const RowMatrix w = params.mat(detail::layer_prefix(layer) + ".weight");
  return detail::conv_forward<double>(w, detail::fold_kernel<double>(params, cfg, layer), topo, features, h);
}

}  // namespace graphsolver::nn
