#pragma once

#include "graphsolver/double_double.hpp"
#include "graphsolver/graph.hpp"
#include "graphsolver/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace graphsolver::nn {

using MatrixRef = Eigen::Map<RowMatrix>;
using ConstMatrixRef = Eigen::Map<const RowMatrix>;

/// 64-byte aligned so that vectorized kernels see the same alignment, and
/// round the same way, wherever a tensor was allocated.
using TensorData = std::vector<double, Eigen::aligned_allocator<double>>;

struct Tensor {
  std::vector<std::size_t> shape;
  TensorData data;
  bool trainable = true;

  std::size_t size() const { return data.size(); }
  /// Rank-1 tensors view as a 1 x n row, rank-2 as rows x cols.
  MatrixRef matrix();
  ConstMatrixRef matrix() const;
};

/// Named tensors in insertion order.
class ParamSet {
 public:
  Tensor& add(const std::string& name, std::vector<std::size_t> shape, bool trainable = true);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  MatrixRef mat(const std::string& name) { return at(name).matrix(); }
  ConstMatrixRef mat(const std::string& name) const { return at(name).matrix(); }
  void remove(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
  std::size_t scalar_count(bool trainable_only = true) const;

  /// Same names and shapes, all values zero.
  ParamSet zeros_like() const;
  /// this += scale * other over trainable tensors; layouts must match.
  void add_scaled(const ParamSet& other, double scale);
  bool same_layout(const ParamSet& other) const;
  /// Name of the first tensor holding a non-finite value, if any.
  std::optional<std::string> first_non_finite() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t> index_;
};

struct ModelConfig {
  int in_dim = 9;
  int hidden = 64;
  int gcn_layers = 4;
  int kernel_hidden = 256;
  /// Hidden layers of the kernel FCN, each followed by PReLU.
  int kernel_layers = 3;
  int head_hidden = 32;
  bool use_batch_norm = false;
  double prelu_init = 0.25;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

/// Output heads in label column order.
inline const std::array<std::string, 6> kHeadNames{"x_r", "y_r", "z_r", "x_i", "y_i", "z_i"};

/// Weights and biases uniform in +-sqrt(1/fan_in), PReLU slopes at cfg.prelu_init,
/// batch-norm scale 1 / shift 0 / running mean 0 / running variance 1.
ParamSet init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Throws InvalidArgument unless params carry exactly the tensors cfg requires
/// (normalization buffers are allowed in addition).
void check_compatible(const ParamSet& params, const ModelConfig& cfg);

// ---------------------------------------------------------------- graph batches

/// Neighbourhoods in CSR form over one graph or a disjoint union of graphs.
struct Topology {
  std::size_t nodes = 0;
  std::vector<std::uint32_t> offsets;  // entries of node i: [offsets[i], offsets[i+1])
  std::vector<std::uint32_t> target;   // node i owning each entry
  std::vector<std::uint32_t> source;   // neighbour j of each entry
  RowMatrix edge_vectors;              // r_e(i -> j) of each entry
  /// Entries grouped by their source node.
  std::vector<std::uint32_t> source_offsets;
  std::vector<std::uint32_t> by_source;
  /// Node range of each batched graph: [graph_offsets[g], graph_offsets[g+1]).
  std::vector<std::size_t> graph_offsets;

  std::size_t entry_count() const { return source.size(); }
  std::size_t graph_count() const { return graph_offsets.size() - 1; }
};

Topology make_topology(const graph::GraphSample& g);
Topology make_topology(const std::vector<const graph::GraphSample*>& batch);

RowMatrix stack_features(const std::vector<const graph::GraphSample*>& batch);
RowMatrix stack_labels(const std::vector<const graph::GraphSample*>& batch);

// ---------------------------------------------------------------- layers

/// PReLU with one shared slope.
RowMatrix prelu(const RowMatrix& x, double slope);

/// Per-edge kernel matrix of GCN layer `layer` for displacement r_e, hidden x hidden.
RowMatrix kernel_fcn(const ParamSet& params, const ModelConfig& cfg, int layer, const Vec3& r_e);

/// F'(i) = W F(i) + mean_{j in N(i)} F(j) K(r_e(i -> j)); F is nodes x hidden.
RowMatrix graph_conv(const ParamSet& params, const ModelConfig& cfg, int layer, const Topology& topo,
                     const RowMatrix& features);

// ---------------------------------------------------------------- model

enum class Mode { inference, training };

/// Intermediate activations kept for the backward pass.
template <typename Scalar>
struct ForwardCacheT {
  using Mat = RowMatrixT<Scalar>;
  using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  struct Dense {
    Mat input;
    Mat pre;  // pre-activation when followed by PReLU
  };
  struct GcnLayer {
    Mat input;  // F entering the layer
    std::vector<Mat> kernel_inputs;
    std::vector<Mat> kernel_pre;
    Mat kernel_hidden;  // last hidden activation of the kernel FCN, entries x kernel_hidden
    Mat conv;           // graph_conv output
    Mat normalized;     // batch norm x-hat
    Row batch_mean;
    Row batch_var;
    Row inv_std;
    Mat pre_activation;
  };
  Mode mode = Mode::inference;
  Dense up0;
  Dense up1;
  std::vector<GcnLayer> gcn;
  std::array<Dense, 6> head0;
  std::array<Dense, 6> head1;
};

using ForwardCache = ForwardCacheT<double>;

/// nodes x 6 prediction. Training mode uses batch statistics in batch norm.
/// Instantiated for double and DoubleDouble; the latter serves finite-difference checks.
template <typename Scalar>
RowMatrixT<Scalar> forward(const ParamSet& params, const ModelConfig& cfg, const Topology& topo,
                           const RowMatrixT<Scalar>& features, Mode mode = Mode::inference,
                           ForwardCacheT<Scalar>* cache = nullptr);
RowMatrix forward(const ParamSet& params, const ModelConfig& cfg, const graph::GraphSample& g);

/// Mean over the batched graphs of each graph's mse_loss.
template <typename Scalar>
Scalar batch_loss(const ParamSet& params, const ModelConfig& cfg, const Topology& topo,
                  const RowMatrixT<Scalar>& features, const RowMatrixT<Scalar>& labels, Mode mode);

extern template RowMatrixT<double> forward<double>(const ParamSet&, const ModelConfig&, const Topology&,
                                                   const RowMatrixT<double>&, Mode, ForwardCacheT<double>*);
extern template RowMatrixT<DoubleDouble> forward<DoubleDouble>(const ParamSet&, const ModelConfig&, const Topology&,
                                                             const RowMatrixT<DoubleDouble>&, Mode,
                                                             ForwardCacheT<DoubleDouble>*);
extern template double batch_loss<double>(const ParamSet&, const ModelConfig&, const Topology&,
                                          const RowMatrixT<double>&, const RowMatrixT<double>&, Mode);
extern template DoubleDouble batch_loss<DoubleDouble>(const ParamSet&, const ModelConfig&, const Topology&,
                                                    const RowMatrixT<DoubleDouble>&, const RowMatrixT<DoubleDouble>&,
                                                    Mode);

/// Gradients of every tensor given dL/d(output); buffers get zero gradients.
ParamSet backward(const ParamSet& params, const ModelConfig& cfg, const Topology& topo, const ForwardCache& cache,
                  const RowMatrix& d_output);

/// ||pred - label||_F^2 / (6 M).
double mse_loss(const RowMatrix& pred, const RowMatrix& label);

struct LossGradient {
  double loss = 0.0;  // mean over graphs of per-graph MSE
  ParamSet grad;
  ForwardCache cache;
};

LossGradient loss_and_gradient(const ParamSet& params, const ModelConfig& cfg, const Topology& topo,
                               const RowMatrix& features, const RowMatrix& labels, Mode mode);

/// Single-graph gradient of mse_loss against `label`.
ParamSet backward(const ParamSet& params, const ModelConfig& cfg, const graph::GraphSample& g, const RowMatrix& label,
                  Mode mode = Mode::inference);

/// Moves running batch-norm statistics toward the batch statistics in `cache`.
void update_running_stats(ParamSet& params, const ModelConfig& cfg, const ForwardCache& cache);

// ---------------------------------------------------------------- normalization

/// Per-channel standardization of features and labels.
struct Normalization {
  Eigen::RowVectorXd feature_mean;
  Eigen::RowVectorXd feature_std;
  Eigen::RowVectorXd label_mean;
  Eigen::RowVectorXd label_std;
  /// Edge vectors are divided by this (RMS length over the training graphs).
  double edge_scale = 1.0;

  static Normalization identity();
  static Normalization fit(const std::vector<const graph::GraphSample*>& samples);
  RowMatrix features(const RowMatrix& raw) const;
  RowMatrix labels(const RowMatrix& raw) const;
  RowMatrix restore_labels(const RowMatrix& normalized) const;
  void scale_edges(Topology& topo) const;
};

void set_normalization(ParamSet& params, const Normalization& norm);
/// identity() when params carry no normalization buffers.
Normalization normalization_of(const ParamSet& params);
bool has_normalization(const ParamSet& params);

/// Physical-unit (A/m) prediction for a graph, applying stored normalization.
RowMatrix predict(const ParamSet& params, const ModelConfig& cfg, const graph::GraphSample& g);

// ---------------------------------------------------------------- container

inline constexpr std::uint32_t kContainerVersion = 1;

/// "GSNN", u32 version, u32 length + config JSON, u32 tensor count, then per
/// tensor u32 name length, name, u32 rank, rank x u64 dims, f64 payload.
void save_params(std::ostream& out, const ParamSet& params, const ModelConfig& cfg);
std::pair<ParamSet, ModelConfig> load_params(std::istream& in);
void save_params_file(const std::string& path, const ParamSet& params, const ModelConfig& cfg);
std::pair<ParamSet, ModelConfig> load_params_file(const std::string& path);
/// Loads and requires the stored architecture to equal `expected`.
ParamSet load_params_for(std::istream& in, const ModelConfig& expected);

}  // namespace graphsolver::nn
