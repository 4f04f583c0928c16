#include "graphsolver/nn.hpp"
#include "graphsolver/random.hpp"

#include <json.hpp>

#include <cmath>
#include <numeric>

namespace graphsolver::nn {

MatrixRef Tensor::matrix() {
  if (shape.size() == 1) return MatrixRef(data.data(), 1, static_cast<Eigen::Index>(shape[0]));
  if (shape.size() == 2) {
    return MatrixRef(data.data(), static_cast<Eigen::Index>(shape[0]), static_cast<Eigen::Index>(shape[1]));
  }
  throw InvalidArgument("matrix view needs a rank 1 or rank 2 tensor");
}

ConstMatrixRef Tensor::matrix() const {
  if (shape.size() == 1) return ConstMatrixRef(data.data(), 1, static_cast<Eigen::Index>(shape[0]));
  if (shape.size() == 2) {
    return ConstMatrixRef(data.data(), static_cast<Eigen::Index>(shape[0]), static_cast<Eigen::Index>(shape[1]));
  }
  throw InvalidArgument("matrix view needs a rank 1 or rank 2 tensor");
}

Tensor& ParamSet::add(const std::string& name, std::vector<std::size_t> shape, bool trainable) {
  if (contains(name)) throw InvalidArgument("duplicate tensor '" + name + "'");
  Tensor t;
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  t.shape = std::move(shape);
  t.data.assign(n, 0.0);
  t.trainable = trainable;
  index_[name] = entries_.size();
  entries_.emplace_back(name, std::move(t));
  return entries_.back().second;
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("no tensor named '" + name + "'");
  return entries_[it->second].second;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("no tensor named '" + name + "'");
  return entries_[it->second].second;
}

void ParamSet::remove(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) return;
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(it->second));
  index_.clear();
  for (std::size_t i = 0; i < entries_.size(); ++i) index_[entries_[i].first] = i;
}

std::size_t ParamSet::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) {
    if (!trainable_only || t.trainable) n += t.size();
  }
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& [name, t] : entries_) out.add(name, t.shape, t.trainable);
  return out;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first || entries_[i].second.shape != other.entries_[i].second.shape) {
      return false;
    }
  }
  return true;
}

void ParamSet::add_scaled(const ParamSet& other, double scale) {
  if (!same_layout(other)) throw InvalidArgument("parameter layouts differ");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& dst = entries_[i].second;
    if (!dst.trainable) continue;
    const auto& src = other.entries_[i].second.data;
    for (std::size_t k = 0; k < dst.data.size(); ++k) dst.data[k] += scale * src[k];
  }
}

std::optional<std::string> ParamSet::first_non_finite() const {
  for (const auto& [name, t] : entries_) {
    for (double v : t.data) {
      if (!std::isfinite(v)) return name;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- config

void ModelConfig::validate() const {
  if (in_dim != graph::kFeatureWidth) throw InvalidArgument("model in_dim must be 9");
  if (hidden < 1 || gcn_layers < 0 || kernel_hidden < 1 || kernel_layers < 1 || head_hidden < 1) {
    throw InvalidArgument("model widths must be >= 1 (gcn_layers >= 0)");
  }
  if (!(prelu_init >= 0.0 && std::isfinite(prelu_init))) throw InvalidArgument("prelu_init must be finite and >= 0");
  if (!(bn_epsilon > 0.0)) throw InvalidArgument("bn_epsilon must be > 0");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) throw InvalidArgument("bn_momentum must lie in (0, 1]");
}

std::string ModelConfig::to_json() const {
  nlohmann::json j{{"in_dim", in_dim},
                   {"hidden", hidden},
                   {"gcn_layers", gcn_layers},
                   {"kernel_hidden", kernel_hidden},
                   {"kernel_layers", kernel_layers},
                   {"head_hidden", head_hidden},
                   {"use_batch_norm", use_batch_norm},
                   {"prelu_init", prelu_init},
                   {"bn_epsilon", bn_epsilon},
                   {"bn_momentum", bn_momentum}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig cfg;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& [key, value] : j.items()) {
      if (key == "in_dim") cfg.in_dim = value.get<int>();
      else if (key == "hidden") cfg.hidden = value.get<int>();
      else if (key == "gcn_layers") cfg.gcn_layers = value.get<int>();
      else if (key == "kernel_hidden") cfg.kernel_hidden = value.get<int>();
      else if (key == "kernel_layers") cfg.kernel_layers = value.get<int>();
      else if (key == "head_hidden") cfg.head_hidden = value.get<int>();
      else if (key == "use_batch_norm") cfg.use_batch_norm = value.get<bool>();
      else if (key == "prelu_init") cfg.prelu_init = value.get<double>();
      else if (key == "bn_epsilon") cfg.bn_epsilon = value.get<double>();
      else if (key == "bn_momentum") cfg.bn_momentum = value.get<double>();
      else throw InvalidArgument("unknown model config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------- layout

namespace {

enum class Init { uniform, prelu, one, zero };

struct Slot {
  std::string name;
  std::vector<std::size_t> shape;
  Init init;
  std::size_t fan_in;
  bool trainable;
};

void dense(std::vector<Slot>& out, const std::string& prefix, std::size_t in, std::size_t outw) {
  out.push_back({prefix + ".weight", {in, outw}, Init::uniform, in, true});
  out.push_back({prefix + ".bias", {outw}, Init::uniform, in, true});
}

void act(std::vector<Slot>& out, const std::string& name) { out.push_back({name, {1}, Init::prelu, 1, true}); }

std::vector<Slot> layout(const ModelConfig& cfg) {
  cfg.validate();
  const auto c = static_cast<std::size_t>(cfg.hidden);
  const auto kh = static_cast<std::size_t>(cfg.kernel_hidden);
  std::vector<Slot> s;
  dense(s, "up.0", static_cast<std::size_t>(cfg.in_dim), c);
  act(s, "up.act");
  dense(s, "up.1", c, c);
  for (int l = 0; l < cfg.gcn_layers; ++l) {
    const std::string p = "gcn." + std::to_string(l);
    s.push_back({p + ".weight", {c, c}, Init::uniform, c, true});
    for (int k = 0; k < cfg.kernel_layers; ++k) {
      dense(s, p + ".kernel." + std::to_string(k), k == 0 ? 3 : kh, kh);
      act(s, p + ".kernel.act." + std::to_string(k));
    }
    dense(s, p + ".kernel." + std::to_string(cfg.kernel_layers), kh, c * c);
    if (cfg.use_batch_norm) {
      s.push_back({p + ".bn.scale", {c}, Init::one, 0, true});
      s.push_back({p + ".bn.shift", {c}, Init::zero, 0, true});
      s.push_back({p + ".bn.running_mean", {c}, Init::zero, 0, false});
      s.push_back({p + ".bn.running_var", {c}, Init::one, 0, false});
    }
    act(s, p + ".act");
  }
  const auto hh = static_cast<std::size_t>(cfg.head_hidden);
  for (const auto& h : kHeadNames) {
    dense(s, "head." + h + ".0", c, hh);
    act(s, "head." + h + ".act");
    dense(s, "head." + h + ".1", hh, 1);
  }
  return s;
}

bool is_normalization(const std::string& name) { return name.rfind("norm.", 0) == 0; }

}  // namespace

ParamSet init_params(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  ParamSet params;
  for (const auto& slot : layout(cfg)) {
    auto& t = params.add(slot.name, slot.shape, slot.trainable);
    switch (slot.init) {
      case Init::uniform: {
        const double bound = std::sqrt(1.0 / static_cast<double>(slot.fan_in));
        for (double& v : t.data) v = rng.uniform(-bound, bound);
        break;
      }
      case Init::prelu:
        std::fill(t.data.begin(), t.data.end(), cfg.prelu_init);
        break;
      case Init::one:
        std::fill(t.data.begin(), t.data.end(), 1.0);
        break;
      case Init::zero:
        break;
    }
  }
  return params;
}

void check_compatible(const ParamSet& params, const ModelConfig& cfg) {
  const auto slots = layout(cfg);
  for (const auto& slot : slots) {
    if (!params.contains(slot.name)) throw InvalidArgument("parameters lack tensor '" + slot.name + "' for this config");
    const auto& t = params.at(slot.name);
    if (t.shape != slot.shape) throw InvalidArgument("tensor '" + slot.name + "' has a shape incompatible with config");
  }
  for (const auto& [name, t] : params.entries()) {
    if (is_normalization(name)) continue;
    bool known = false;
    for (const auto& slot : slots) known = known || slot.name == name;
    if (!known) throw InvalidArgument("tensor '" + name + "' is not part of this config");
  }
}

// ---------------------------------------------------------------- normalization

Normalization Normalization::identity() {
  Normalization n;
  n.feature_mean = Eigen::RowVectorXd::Zero(graph::kFeatureWidth);
  n.feature_std = Eigen::RowVectorXd::Ones(graph::kFeatureWidth);
  n.label_mean = Eigen::RowVectorXd::Zero(graph::kLabelWidth);
  n.label_std = Eigen::RowVectorXd::Ones(graph::kLabelWidth);
  return n;
}

namespace {

void channel_stats(const std::vector<const RowMatrix*>& blocks, int width, Eigen::RowVectorXd& mean,
                   Eigen::RowVectorXd& stddev) {
  mean = Eigen::RowVectorXd::Zero(width);
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(width);
  double count = 0.0;
  for (const auto* b : blocks) {
    mean += b->colwise().sum();
    count += static_cast<double>(b->rows());
  }
  if (count == 0.0) throw InvalidArgument("normalization needs at least one node");
  mean /= count;
  for (const auto* b : blocks) sq += (b->rowwise() - mean).array().square().matrix().colwise().sum();
  stddev = (sq / count).array().sqrt().matrix();
  // Constant channels keep unit scale.
  for (int c = 0; c < width; ++c) {
    if (!(stddev[c] > 1e-12 * (1.0 + std::abs(mean[c])))) stddev[c] = 1.0;
  }
}

}  // namespace

Normalization Normalization::fit(const std::vector<const graph::GraphSample*>& samples) {
  std::vector<const RowMatrix*> features, labels;
  for (const auto* g : samples) {
    features.push_back(&g->features);
    if (!g->labels) throw InvalidArgument("normalization needs labeled samples");
    labels.push_back(&*g->labels);
  }
  Normalization n;
  channel_stats(features, graph::kFeatureWidth, n.feature_mean, n.feature_std);
  channel_stats(labels, graph::kLabelWidth, n.label_mean, n.label_std);
  double sq = 0.0, count = 0.0;
  for (const auto* g : samples) {
    sq += g->edge_vectors.squaredNorm();
    count += static_cast<double>(g->edge_vectors.rows());
  }
  const double rms = count > 0.0 ? std::sqrt(sq / count) : 0.0;
  n.edge_scale = rms > 0.0 ? rms : 1.0;
  return n;
}

RowMatrix Normalization::features(const RowMatrix& raw) const {
  return ((raw.rowwise() - feature_mean).array().rowwise() / feature_std.array()).matrix();
}

RowMatrix Normalization::labels(const RowMatrix& raw) const {
  return ((raw.rowwise() - label_mean).array().rowwise() / label_std.array()).matrix();
}

RowMatrix Normalization::restore_labels(const RowMatrix& normalized) const {
  return ((normalized.array().rowwise() * label_std.array()).matrix().rowwise() + label_mean);
}

void Normalization::scale_edges(Topology& topo) const {
  if (edge_scale != 1.0) topo.edge_vectors /= edge_scale;
}

void set_normalization(ParamSet& params, const Normalization& norm) {
  const std::pair<const char*, const Eigen::RowVectorXd*> items[] = {{"norm.feature_mean", &norm.feature_mean},
                                                                     {"norm.feature_std", &norm.feature_std},
                                                                     {"norm.label_mean", &norm.label_mean},
                                                                     {"norm.label_std", &norm.label_std}};
  for (const auto& [name, values] : items) {
    params.remove(name);
    auto& t = params.add(name, {static_cast<std::size_t>(values->size())}, false);
    for (Eigen::Index i = 0; i < values->size(); ++i) t.data[static_cast<std::size_t>(i)] = (*values)[i];
  }
  params.remove("norm.edge_scale");
  params.add("norm.edge_scale", {1}, false).data[0] = norm.edge_scale;
}

bool has_normalization(const ParamSet& params) { return params.contains("norm.feature_mean"); }

Normalization normalization_of(const ParamSet& params) {
  if (!has_normalization(params)) return Normalization::identity();
  Normalization n;
  n.feature_mean = params.mat("norm.feature_mean");
  n.feature_std = params.mat("norm.feature_std");
  n.label_mean = params.mat("norm.label_mean");
  n.label_std = params.mat("norm.label_std");
  if (params.contains("norm.edge_scale")) n.edge_scale = params.at("norm.edge_scale").data.at(0);
  if (!(n.edge_scale > 0.0) || !std::isfinite(n.edge_scale)) throw FormatError("normalization edge scale must be positive");
  if (n.feature_mean.size() != graph::kFeatureWidth || n.feature_std.size() != graph::kFeatureWidth ||
      n.label_mean.size() != graph::kLabelWidth || n.label_std.size() != graph::kLabelWidth) {
    throw FormatError("normalization tensors have the wrong width");
  }
  return n;
}

RowMatrix predict(const ParamSet& params, const ModelConfig& cfg, const graph::GraphSample& g) {
  const Normalization norm = normalization_of(params);
  Topology topo = make_topology(g);
  norm.scale_edges(topo);
  return norm.restore_labels(forward<double>(params, cfg, topo, norm.features(g.features)));
}

}  // namespace graphsolver::nn
