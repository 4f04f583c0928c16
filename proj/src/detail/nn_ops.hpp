#pragma once

#include "graphsolver/nn.hpp"

#include <algorithm>

namespace graphsolver::nn::detail {

inline std::string layer_prefix(int layer) { return "gcn." + std::to_string(layer); }

template <typename Scalar>
RowMatrixT<Scalar> param_as(const ParamSet& params, const std::string& name) {
  return params.mat(name).template cast<Scalar>();
}

template <typename Scalar>
Scalar slope_as(const ParamSet& params, const std::string& name) {
  return static_cast<Scalar>(params.at(name).data[0]);
}

/// x W + b with W stored in x out.
template <typename Scalar>
RowMatrixT<Scalar> dense_forward(const RowMatrixT<Scalar>& x, const ParamSet& params, const std::string& name) {
  const auto w = params.mat(name + ".weight");
  if (x.cols() != w.rows()) throw InvalidArgument("dense layer '" + name + "' input width mismatch");
  RowMatrixT<Scalar> y;
  if constexpr (std::is_same_v<Scalar, double>) {
    y = x * w;
    y.rowwise() += params.mat(name + ".bias").row(0);
  } else {
    y = x * w.template cast<Scalar>();
    y.rowwise() += params.mat(name + ".bias").row(0).template cast<Scalar>();
  }
  return y;
}

template <typename Scalar>
RowMatrixT<Scalar> prelu_as(const RowMatrixT<Scalar>& x, Scalar slope) {
  return x.unaryExpr([slope](Scalar v) { return v > Scalar(0) ? v : slope * v; });
}

/// Pre-activations and inputs of each kernel-FCN hidden layer, when requested.
template <typename Scalar>
struct KernelTrace {
  std::vector<RowMatrixT<Scalar>> inputs;
  std::vector<RowMatrixT<Scalar>> pre;
};

/// Hidden stack of the kernel FCN over per-entry edge vectors.
template <typename Scalar>
RowMatrixT<Scalar> kernel_hidden(const ParamSet& params, const ModelConfig& cfg, int layer, const RowMatrix& r,
                                 KernelTrace<Scalar>* trace) {
  const std::string p = layer_prefix(layer) + ".kernel.";
  RowMatrixT<Scalar> h = r.template cast<Scalar>();
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  for (int k = 0; k < cfg.kernel_layers; ++k) {
    RowMatrixT<Scalar> pre = dense_forward<Scalar>(h, params, p + std::to_string(k));
    RowMatrixT<Scalar> next = prelu_as<Scalar>(pre, slope_as<Scalar>(params, p + "act." + std::to_string(k)));
    if (trace) {
      trace->inputs.push_back(std::move(h));
      trace->pre.push_back(std::move(pre));
    }
    h = std::move(next);
  }
  return h;
}

/// Final kernel layer rearranged so a node's contribution to every message
/// it sends is one product: wc is C x (Kh C) with wc(c, k C + c') = W(k, c C + c'),
/// bc is the bias as a C x C matrix.
template <typename Scalar>
struct FoldedKernel {
  RowMatrixT<Scalar> wc;
  RowMatrixT<Scalar> bc;
};

template <typename Scalar>
FoldedKernel<Scalar> fold_kernel(const ParamSet& params, const ModelConfig& cfg, int layer) {
  const std::string name = layer_prefix(layer) + ".kernel." + std::to_string(cfg.kernel_layers);
  const auto w = params.mat(name + ".weight");
  const auto b = params.mat(name + ".bias");
  const Eigen::Index c = cfg.hidden;
  const Eigen::Index kh = cfg.kernel_hidden;
  if (w.rows() != kh || w.cols() != c * c) throw InvalidArgument("kernel output layer shape mismatch");
  FoldedKernel<Scalar> f;
  f.wc.resize(c, kh * c);
  for (Eigen::Index k = 0; k < kh; ++k) {
    for (Eigen::Index a = 0; a < c; ++a) f.wc.block(a, k * c, 1, c) = w.block(k, a * c, 1, c).template cast<Scalar>();
  }
  f.bc = Eigen::Map<const RowMatrix>(b.data(), c, c).template cast<Scalar>();
  return f;
}

// Keeps the per-chunk folded products near 32 MB of doubles.
inline Eigen::Index chunk_rows(Eigen::Index width) {
  return std::max<Eigen::Index>(1, (Eigen::Index{1} << 22) / width);
}

template <typename Scalar>
RowMatrixT<Scalar> conv_forward(const RowMatrixT<Scalar>& w, const FoldedKernel<Scalar>& kernel, const Topology& topo,
                                const RowMatrixT<Scalar>& f, const RowMatrixT<Scalar>& h) {
  using Mat = RowMatrixT<Scalar>;
  const Eigen::Index m = f.rows();
  const Eigen::Index c = f.cols();
  const Eigen::Index kh = h.cols();
  if (m != static_cast<Eigen::Index>(topo.nodes)) throw InvalidArgument("feature rows do not match topology");
  Mat out = f * w.transpose();
  if (topo.entry_count() == 0) return out;
  const Mat q = f * kernel.bc;
  Mat agg = Mat::Zero(m, c);
  const Eigen::Index step = chunk_rows(kh * c);
  for (Eigen::Index a = 0; a < m; a += step) {
    const Eigen::Index n = std::min(step, m - a);
    const Mat t = f.middleRows(a, n) * kernel.wc;
    for (Eigen::Index j = a; j < a + n; ++j) {
      const Eigen::Map<const Mat> tj(t.row(j - a).data(), kh, c);
      for (auto k = topo.source_offsets[j]; k < topo.source_offsets[j + 1]; ++k) {
        const auto e = topo.by_source[k];
        agg.row(topo.target[e]).noalias() += h.row(e) * tj;
        agg.row(topo.target[e]) += q.row(j);
      }
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto deg = topo.offsets[i + 1] - topo.offsets[i];
    if (deg > 0) out.row(i) += agg.row(i) / static_cast<Scalar>(deg);
  }
  return out;
}

// ---------------------------------------------------------------- backward (double only)

/// Accumulates dW, db and (optionally) writes dx.
void dense_backward(const RowMatrix& x, ConstMatrixRef w, const RowMatrix& dy, MatrixRef dw, MatrixRef db,
                    RowMatrix* dx);

/// dL/dx of PReLU, adding dL/dslope into `dslope`.
RowMatrix prelu_backward(const RowMatrix& pre, double slope, const RowMatrix& dy, double& dslope);

struct ConvGrad {
  RowMatrix dw;   // C x C
  RowMatrix dwc;  // folded layout
  RowMatrix dbc;
  RowMatrix df;
  RowMatrix dh;
};
ConvGrad conv_backward(ConstMatrixRef w, const FoldedKernel<double>& kernel, const Topology& topo, const RowMatrix& f,
                       const RowMatrix& h, const RowMatrix& g);

}  // namespace graphsolver::nn::detail
