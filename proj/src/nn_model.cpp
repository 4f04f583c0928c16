#include "detail/nn_ops.hpp"

#include <cmath>

namespace graphsolver::nn {

namespace {

using detail::dense_backward;
using detail::layer_prefix;
using detail::prelu_backward;

template <typename Mat>
void require_finite(const Mat& m, const std::string& where) {
  if (!m.allFinite()) throw NumericalError("non-finite activations in " + where);
}

double slope(const ParamSet& params, const std::string& name) { return params.at(name).data[0]; }

}  // namespace

template <typename Scalar>
RowMatrixT<Scalar> forward(const ParamSet& params, const ModelConfig& cfg, const Topology& topo,
                           const RowMatrixT<Scalar>& features, Mode mode, ForwardCacheT<Scalar>* cache) {
  using Mat = RowMatrixT<Scalar>;
  using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  if (features.cols() != cfg.in_dim) {
    throw InvalidArgument("feature width " + std::to_string(features.cols()) + " != model in_dim " +
                          std::to_string(cfg.in_dim));
  }
  if (features.rows() != static_cast<Eigen::Index>(topo.nodes)) throw InvalidArgument("feature rows != node count");
  const Eigen::Index m = features.rows();
  ForwardCacheT<Scalar> local;
  ForwardCacheT<Scalar>& cc = cache ? *cache : local;
  cc.mode = mode;
  cc.gcn.assign(static_cast<std::size_t>(cfg.gcn_layers), {});

  cc.up0.input = features;
  cc.up0.pre = detail::dense_forward<Scalar>(features, params, "up.0");
  cc.up1.input = detail::prelu_as<Scalar>(cc.up0.pre, detail::slope_as<Scalar>(params, "up.act"));
  Mat f = detail::dense_forward<Scalar>(cc.up1.input, params, "up.1");
  require_finite(f, "up");

  for (int l = 0; l < cfg.gcn_layers; ++l) {
    auto& lc = cc.gcn[static_cast<std::size_t>(l)];
    const std::string p = layer_prefix(l);
    detail::KernelTrace<Scalar> trace;
    lc.kernel_hidden = detail::kernel_hidden<Scalar>(params, cfg, l, topo.edge_vectors, &trace);
    lc.kernel_inputs = std::move(trace.inputs);
    lc.kernel_pre = std::move(trace.pre);
    lc.conv = detail::conv_forward<Scalar>(detail::param_as<Scalar>(params, p + ".weight"),
                                           detail::fold_kernel<Scalar>(params, cfg, l), topo, f, lc.kernel_hidden);
    if (cfg.use_batch_norm) {
      if (m == 0) throw InvalidArgument("batch norm needs at least one node");
      const Row scale = detail::param_as<Scalar>(params, p + ".bn.scale").row(0);
      const Row shift = detail::param_as<Scalar>(params, p + ".bn.shift").row(0);
      const auto eps = static_cast<Scalar>(cfg.bn_epsilon);
      Row mean;
      if (mode == Mode::training) {
        lc.batch_mean = lc.conv.colwise().mean();
        lc.batch_var = (lc.conv.rowwise() - lc.batch_mean).array().square().colwise().mean().matrix();
        lc.inv_std = (lc.batch_var.array() + eps).rsqrt().matrix();
        mean = lc.batch_mean;
      } else {
        mean = detail::param_as<Scalar>(params, p + ".bn.running_mean").row(0);
        lc.inv_std = (detail::param_as<Scalar>(params, p + ".bn.running_var").row(0).array() + eps).rsqrt().matrix();
      }
      lc.normalized = ((lc.conv.rowwise() - mean).array().rowwise() * lc.inv_std.array()).matrix();
      lc.pre_activation = (lc.normalized.array().rowwise() * scale.array()).matrix();
      lc.pre_activation.rowwise() += shift;
    } else {
      lc.pre_activation = lc.conv;
    }
    lc.input = std::move(f);
    f = detail::prelu_as<Scalar>(lc.pre_activation, detail::slope_as<Scalar>(params, p + ".act"));
    require_finite(f, p);
  }

  Mat out(m, graph::kLabelWidth);
  for (std::size_t h = 0; h < kHeadNames.size(); ++h) {
    const std::string p = "head." + kHeadNames[h];
    cc.head0[h].input = f;
    cc.head0[h].pre = detail::dense_forward<Scalar>(f, params, p + ".0");
    cc.head1[h].input = detail::prelu_as<Scalar>(cc.head0[h].pre, detail::slope_as<Scalar>(params, p + ".act"));
    out.col(static_cast<Eigen::Index>(h)) = detail::dense_forward<Scalar>(cc.head1[h].input, params, p + ".1").col(0);
  }
  require_finite(out, "heads");
  return out;
}

template <typename Scalar>
Scalar batch_loss(const ParamSet& params, const ModelConfig& cfg, const Topology& topo,
                  const RowMatrixT<Scalar>& features, const RowMatrixT<Scalar>& labels, Mode mode) {
  const RowMatrixT<Scalar> pred = forward<Scalar>(params, cfg, topo, features, mode, nullptr);
  if (labels.rows() != pred.rows() || labels.cols() != pred.cols()) throw InvalidArgument("labels must be nodes x 6");
  Scalar loss(0);
  for (std::size_t g = 0; g < topo.graph_count(); ++g) {
    const auto a = static_cast<Eigen::Index>(topo.graph_offsets[g]);
    const auto n = static_cast<Eigen::Index>(topo.graph_offsets[g + 1]) - a;
    if (n == 0) throw InvalidArgument("batch contains an empty graph");
    loss += (pred.middleRows(a, n) - labels.middleRows(a, n)).squaredNorm() /
            static_cast<Scalar>(n * graph::kLabelWidth);
  }
  return loss / static_cast<Scalar>(topo.graph_count());
}

template RowMatrixT<double> forward<double>(const ParamSet&, const ModelConfig&, const Topology&,
                                            const RowMatrixT<double>&, Mode, ForwardCacheT<double>*);
template RowMatrixT<DoubleDouble> forward<DoubleDouble>(const ParamSet&, const ModelConfig&, const Topology&,
                                                      const RowMatrixT<DoubleDouble>&, Mode,
                                                      ForwardCacheT<DoubleDouble>*);
template double batch_loss<double>(const ParamSet&, const ModelConfig&, const Topology&, const RowMatrixT<double>&,
                                   const RowMatrixT<double>&, Mode);
template DoubleDouble batch_loss<DoubleDouble>(const ParamSet&, const ModelConfig&, const Topology&,
                                             const RowMatrixT<DoubleDouble>&, const RowMatrixT<DoubleDouble>&, Mode);

RowMatrix forward(const ParamSet& params, const ModelConfig& cfg, const graph::GraphSample& g) {
  return forward<double>(params, cfg, make_topology(g), g.features);
}

ParamSet backward(const ParamSet& params, const ModelConfig& cfg, const Topology& topo, const ForwardCache& cache,
                  const RowMatrix& d_output) {
  const Eigen::Index m = static_cast<Eigen::Index>(topo.nodes);
  if (d_output.rows() != m || d_output.cols() != graph::kLabelWidth) {
    throw InvalidArgument("output gradient must be nodes x 6");
  }
  ParamSet grad = params.zeros_like();
  RowMatrix df = RowMatrix::Zero(m, cfg.hidden);

  for (std::size_t h = 0; h < kHeadNames.size(); ++h) {
    const std::string p = "head." + kHeadNames[h];
    const RowMatrix dy = d_output.col(static_cast<Eigen::Index>(h));
    RowMatrix da;
    dense_backward(cache.head1[h].input, params.mat(p + ".1.weight"), dy, grad.mat(p + ".1.weight"),
                   grad.mat(p + ".1.bias"), &da);
    const RowMatrix dpre = prelu_backward(cache.head0[h].pre, slope(params, p + ".act"), da, grad.at(p + ".act").data[0]);
    RowMatrix dfh;
    dense_backward(cache.head0[h].input, params.mat(p + ".0.weight"), dpre, grad.mat(p + ".0.weight"),
                   grad.mat(p + ".0.bias"), &dfh);
    df += dfh;
  }

  for (int l = cfg.gcn_layers - 1; l >= 0; --l) {
    const auto& lc = cache.gcn[static_cast<std::size_t>(l)];
    const std::string p = layer_prefix(l);
    RowMatrix dy = prelu_backward(lc.pre_activation, slope(params, p + ".act"), df, grad.at(p + ".act").data[0]);
    require_finite(dy, p + " backward");
    RowMatrix dconv;
    if (cfg.use_batch_norm) {
      const auto scale = params.mat(p + ".bn.scale");
      grad.mat(p + ".bn.scale").row(0) += (dy.array() * lc.normalized.array()).colwise().sum().matrix();
      grad.mat(p + ".bn.shift").row(0) += dy.colwise().sum();
      const RowMatrix dxhat = (dy.array().rowwise() * scale.row(0).array()).matrix();
      if (cache.mode == Mode::training) {
        const double count = static_cast<double>(m);
        const Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
        const Eigen::RowVectorXd sum_dx = (dxhat.array() * lc.normalized.array()).colwise().sum().matrix();
        RowMatrix centered = dxhat * count;
        centered.rowwise() -= sum_d;
        centered -= (lc.normalized.array().rowwise() * sum_dx.array()).matrix();
        dconv = (centered.array().rowwise() * (lc.inv_std.array() / count)).matrix();
      } else {
        dconv = (dxhat.array().rowwise() * lc.inv_std.array()).matrix();
      }
    } else {
      dconv = std::move(dy);
    }

    const auto folded = detail::fold_kernel<double>(params, cfg, l);
    detail::ConvGrad cg = detail::conv_backward(params.mat(p + ".weight"), folded, topo, lc.input, lc.kernel_hidden, dconv);
    grad.mat(p + ".weight") += cg.dw;

    const std::string out_name = p + ".kernel." + std::to_string(cfg.kernel_layers);
    auto dwk = grad.mat(out_name + ".weight");
    const Eigen::Index c = cfg.hidden;
    for (Eigen::Index k = 0; k < cfg.kernel_hidden; ++k) {
      for (Eigen::Index a = 0; a < c; ++a) dwk.block(k, a * c, 1, c) += cg.dwc.block(a, k * c, 1, c);
    }
    grad.mat(out_name + ".bias").row(0) += Eigen::Map<const Eigen::RowVectorXd>(cg.dbc.data(), c * c);

    RowMatrix dh = std::move(cg.dh);
    for (int k = cfg.kernel_layers - 1; k >= 0; --k) {
      const std::string name = p + ".kernel." + std::to_string(k);
      const std::string act = p + ".kernel.act." + std::to_string(k);
      const RowMatrix dpre = prelu_backward(lc.kernel_pre[static_cast<std::size_t>(k)], slope(params, act), dh,
                                            grad.at(act).data[0]);
      RowMatrix dx;
      dense_backward(lc.kernel_inputs[static_cast<std::size_t>(k)], params.mat(name + ".weight"), dpre,
                     grad.mat(name + ".weight"), grad.mat(name + ".bias"), k > 0 ? &dx : nullptr);
      dh = std::move(dx);
    }
    df = std::move(cg.df);
  }

  RowMatrix da;
  dense_backward(cache.up1.input, params.mat("up.1.weight"), df, grad.mat("up.1.weight"), grad.mat("up.1.bias"), &da);
  const RowMatrix dpre = prelu_backward(cache.up0.pre, slope(params, "up.act"), da, grad.at("up.act").data[0]);
  dense_backward(cache.up0.input, params.mat("up.0.weight"), dpre, grad.mat("up.0.weight"), grad.mat("up.0.bias"),
                 nullptr);

  if (auto bad = grad.first_non_finite()) throw NumericalError("non-finite gradient in " + *bad);
  return grad;
}

double mse_loss(const RowMatrix& pred, const RowMatrix& label) {
  if (pred.rows() != label.rows() || pred.cols() != label.cols()) throw InvalidArgument("mse_loss: shape mismatch");
  if (pred.size() == 0) throw InvalidArgument("mse_loss: empty prediction");
  return (pred - label).squaredNorm() / static_cast<double>(pred.size());
}

LossGradient loss_and_gradient(const ParamSet& params, const ModelConfig& cfg, const Topology& topo,
                               const RowMatrix& features, const RowMatrix& labels, Mode mode) {
  LossGradient out;
  const RowMatrix pred = forward<double>(params, cfg, topo, features, mode, &out.cache);
  if (labels.rows() != pred.rows() || labels.cols() != pred.cols()) throw InvalidArgument("labels must be nodes x 6");
  const std::size_t graphs = topo.graph_count();
  RowMatrix d_out(pred.rows(), pred.cols());
  for (std::size_t g = 0; g < graphs; ++g) {
    const auto a = static_cast<Eigen::Index>(topo.graph_offsets[g]);
    const auto n = static_cast<Eigen::Index>(topo.graph_offsets[g + 1]) - a;
    if (n == 0) throw InvalidArgument("batch contains an empty graph");
    const auto diff = pred.middleRows(a, n) - labels.middleRows(a, n);
    const double count = static_cast<double>(n * graph::kLabelWidth);
    out.loss += diff.squaredNorm() / count;
    d_out.middleRows(a, n) = diff * (2.0 / (count * static_cast<double>(graphs)));
  }
  out.loss /= static_cast<double>(graphs);
  out.grad = backward(params, cfg, topo, out.cache, d_out);
  return out;
}

ParamSet backward(const ParamSet& params, const ModelConfig& cfg, const graph::GraphSample& g, const RowMatrix& label,
                  Mode mode) {
  return loss_and_gradient(params, cfg, make_topology(g), g.features, label, mode).grad;
}

void update_running_stats(ParamSet& params, const ModelConfig& cfg, const ForwardCache& cache) {
  if (!cfg.use_batch_norm || cache.mode != Mode::training) return;
  for (int l = 0; l < cfg.gcn_layers; ++l) {
    const auto& lc = cache.gcn[static_cast<std::size_t>(l)];
    const std::string p = layer_prefix(l);
    const double n = static_cast<double>(lc.conv.rows());
    const double unbias = n > 1.0 ? n / (n - 1.0) : 1.0;
    auto mean = params.mat(p + ".bn.running_mean");
    auto var = params.mat(p + ".bn.running_var");
    mean.row(0) = (1.0 - cfg.bn_momentum) * mean.row(0) + cfg.bn_momentum * lc.batch_mean;
    var.row(0) = (1.0 - cfg.bn_momentum) * var.row(0) + (cfg.bn_momentum * unbias) * lc.batch_var;
  }
}

}  // namespace graphsolver::nn
