#pragma once

#include "graphsolver/graph.hpp"
#include "graphsolver/nn.hpp"
#include "graphsolver/random.hpp"

#include <filesystem>
#include <string>
#include <unistd.h>

namespace testing {

using namespace graphsolver;

/// Erdos-Renyi graph with uniform features, edge vectors and labels in [-1, 1].
inline graph::GraphSample random_graph(std::size_t n, std::uint64_t seed, double edge_probability = 0.35) {
  Rng rng(seed);
  graph::GraphSample g;
  g.node_count = n;
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) {
      if (rng.uniform() < edge_probability) g.adjacency.push_back({i, j});
    }
  }
  g.edge_vectors.resize(static_cast<Eigen::Index>(2 * g.adjacency.size()), 3);
  for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(g.adjacency.size()); ++e) {
    for (int c = 0; c < 3; ++c) {
      const double v = rng.uniform(-1.0, 1.0);
      g.edge_vectors(2 * e, c) = v;
      g.edge_vectors(2 * e + 1, c) = -v;
    }
  }
  g.features.resize(static_cast<Eigen::Index>(n), graph::kFeatureWidth);
  for (Eigen::Index k = 0; k < g.features.size(); ++k) g.features.data()[k] = rng.uniform(-1.0, 1.0);
  RowMatrix labels(static_cast<Eigen::Index>(n), graph::kLabelWidth);
  for (Eigen::Index k = 0; k < labels.size(); ++k) labels.data()[k] = rng.uniform(-1.0, 1.0);
  g.labels = labels;
  return g;
}

/// Kernel matrix of one layer by explicit loops over the raw tensors.
inline std::vector<std::vector<double>> naive_kernel(const nn::ParamSet& p, const nn::ModelConfig& cfg, int layer,
                                                     const double r[3]) {
  const std::string pre = "gcn." + std::to_string(layer) + ".kernel.";
  std::vector<double> h(r, r + 3);
  for (int k = 0; k <= cfg.kernel_layers; ++k) {
    const auto& w = p.at(pre + std::to_string(k) + ".weight");
    const auto& b = p.at(pre + std::to_string(k) + ".bias");
    const std::size_t in = w.shape[0], out = w.shape[1];
    std::vector<double> next(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b.data[o];
      for (std::size_t i = 0; i < in; ++i) s += h[i] * w.data[i * out + o];
      if (k < cfg.kernel_layers) {
        const double a = p.at(pre + "act." + std::to_string(k)).data[0];
        s = s > 0.0 ? s : a * s;
      }
      next[o] = s;
    }
    h = std::move(next);
  }
  const auto c = static_cast<std::size_t>(cfg.hidden);
  std::vector<std::vector<double>> kmat(c, std::vector<double>(c));
  for (std::size_t a = 0; a < c; ++a) {
    for (std::size_t b = 0; b < c; ++b) kmat[a][b] = h[a * c + b];
  }
  return kmat;
}

/// F'(i) = W F(i) + mean_j F(j) K(r_e(i -> j)) evaluated node by node.
inline RowMatrix naive_graph_conv(const nn::ParamSet& p, const nn::ModelConfig& cfg, int layer,
                                  const graph::GraphSample& g, const RowMatrix& f) {
  const auto c = static_cast<std::size_t>(cfg.hidden);
  const auto& w = p.at("gcn." + std::to_string(layer) + ".weight");
  RowMatrix out(f.rows(), f.cols());
  for (std::size_t i = 0; i < g.node_count; ++i) {
    std::vector<double> agg(c, 0.0);
    std::size_t deg = 0;
    for (std::size_t e = 0; e < g.adjacency.size(); ++e) {
      const auto [a, b] = g.adjacency[e];
      std::size_t j;
      Eigen::Index row;
      if (a == i) {
        j = b;
        row = static_cast<Eigen::Index>(2 * e);
      } else if (b == i) {
        j = a;
        row = static_cast<Eigen::Index>(2 * e + 1);
      } else {
        continue;
      }
      const double r[3] = {g.edge_vectors(row, 0), g.edge_vectors(row, 1), g.edge_vectors(row, 2)};
      const auto k = naive_kernel(p, cfg, layer, r);
      for (std::size_t q = 0; q < c; ++q) {
        for (std::size_t s = 0; s < c; ++s) agg[q] += f(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s)) * k[s][q];
      }
      ++deg;
    }
    for (std::size_t q = 0; q < c; ++q) {
      double s = 0.0;
      for (std::size_t t = 0; t < c; ++t) s += w.data[q * c + t] * f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
      if (deg > 0) s += agg[q] / static_cast<double>(deg);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q)) = s;
    }
  }
  return out;
}

/// Fresh empty directory under the system temp path.
inline std::string fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("graphsolver_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

inline double max_abs_diff(const RowMatrix& a, const RowMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace testing
