#include "graphsolver/train.hpp"

#include "graphsolver/parallel.hpp"
#include "graphsolver/random.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>

namespace graphsolver::train {

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw InvalidArgument("learning rate must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw InvalidArgument("decay must lie in (0, 1]");
  if (decay_every < 1) throw InvalidArgument("decay_every must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (workers < 1) throw InvalidArgument("workers must be >= 1");
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw InvalidArgument("epoch must be >= 0");
  return cfg.base_lr * std::pow(cfg.decay, epoch / cfg.decay_every);
}

AdamState AdamState::for_params(const nn::ParamSet& params) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

void adam_step(nn::ParamSet& params, const nn::ParamSet& grads, AdamState& state, double lr) {
  if (!params.same_layout(grads)) throw InvalidArgument("gradient layout does not match the parameters");
  if (state.m.size() == 0 && state.v.size() == 0) state = AdamState::for_params(params);
  if (!params.same_layout(state.m) || !params.same_layout(state.v)) {
    throw InvalidArgument("optimizer state layout does not match the parameters");
  }
  if (auto bad = grads.first_non_finite()) throw NumericalError("non-finite gradient in '" + *bad + "'");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto& entries = params.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto& p = entries[k].second;
    if (!p.trainable) continue;
    const auto& g = grads.entries()[k].second.data;
    auto& m = state.m.entries()[k].second.data;
    auto& v = state.v.entries()[k].second.data;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      p.data[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.epsilon);
    }
  }
}

void write_report_csv(const TrainReport& report, std::ostream& out) {
  out << "epoch,train_mse,test_mse,lr\n" << std::setprecision(17);
  out << 0 << ',' << report.initial_train_mse << ',' << report.initial_test_mse << ',' << report.initial_lr << '\n';
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << e.train_mse << ',' << e.test_mse << ',' << e.lr << '\n';
  }
}

void write_report_csv_file(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  write_report_csv(report, out);
  if (!out) throw FormatError("failed writing '" + path + "'");
}

namespace {

// A sample in the model's input space.
struct Prepared {
  const graph::GraphSample* source = nullptr;
  nn::Topology topo;
  RowMatrix features;
  RowMatrix labels;
};

std::vector<Prepared> prepare(const std::vector<graph::GraphSample>& data, const nn::Normalization& norm) {
  std::vector<Prepared> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& g = data[i];
    if (!g.labels) throw InvalidArgument("sample " + std::to_string(i) + " has no labels");
    out[i].source = &g;
    out[i].topo = nn::make_topology(g);
    norm.scale_edges(out[i].topo);
    out[i].features = norm.features(g.features);
    out[i].labels = norm.labels(*g.labels);
  }
  return out;
}

double mean_mse(const nn::ParamSet& params, const nn::ModelConfig& cfg, const std::vector<Prepared>& data,
                int workers) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> mse(data.size());
  parallel_for(data.size(), workers, [&](std::size_t i) {
    mse[i] = nn::mse_loss(nn::forward<double>(params, cfg, data[i].topo, data[i].features), data[i].labels);
  });
  double sum = 0.0;
  for (double v : mse) sum += v;
  return sum / static_cast<double>(data.size());
}

bool is_head(const std::string& name) { return name.rfind("head.", 0) == 0; }

// Mean-over-graphs gradient of a batch without batch norm. Graphs are
// independent, so they run in parallel and are summed in batch order.
nn::ParamSet independent_gradient(const nn::ParamSet& params, const nn::ModelConfig& cfg,
                                  const std::vector<Prepared>& data, const std::vector<std::size_t>& batch,
                                  int workers) {
  std::vector<nn::ParamSet> parts(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t b) {
    const auto& s = data[batch[b]];
    parts[b] = nn::loss_and_gradient(params, cfg, s.topo, s.features, s.labels, nn::Mode::inference).grad;
  });
  nn::ParamSet grad = params.zeros_like();
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& p : parts) grad.add_scaled(p, scale);
  return grad;
}

}  // namespace

TrainResult train(const std::vector<graph::GraphSample>& train_set, const std::vector<graph::GraphSample>& test_set,
                  const TrainConfig& cfg, nn::ModelConfig model_cfg) {
  cfg.validate();
  if (train_set.empty()) throw InvalidArgument("training set is empty");
  model_cfg.use_batch_norm = cfg.use_batch_norm;
  model_cfg.validate();

  TrainResult result;
  result.model = model_cfg;
  nn::ParamSet params;
  if (cfg.warm_start) {
    auto [loaded, stored] = nn::load_params_file(*cfg.warm_start);
    if (!(stored == model_cfg)) {
      throw InvalidArgument("warm start container architecture " + stored.to_json() +
                            " is incompatible with the requested " + model_cfg.to_json());
    }
    params = std::move(loaded);
  } else {
    params = nn::init_params(model_cfg, cfg.seed);
  }
  if (!nn::has_normalization(params)) {
    std::vector<const graph::GraphSample*> ptrs;
    for (const auto& g : train_set) ptrs.push_back(&g);
    nn::set_normalization(params, cfg.normalize ? nn::Normalization::fit(ptrs) : nn::Normalization::identity());
  }
  const nn::Normalization norm = nn::normalization_of(params);
  const std::vector<Prepared> train_data = prepare(train_set, norm);
  const std::vector<Prepared> test_data = prepare(test_set, norm);

  auto& report = result.report;
  report.initial_train_mse = mean_mse(params, model_cfg, train_data, cfg.workers);
  report.initial_test_mse = mean_mse(params, model_cfg, test_data, cfg.workers);
  report.initial_lr = lr_schedule(0, cfg);

  AdamState adam = AdamState::for_params(params);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  double best = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = lr_schedule(epoch, cfg);
    rng.shuffle(order);
    for (std::size_t a = 0; a < order.size(); a += batch) {
      const std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(a),
                                             order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), a + batch)));
      nn::ParamSet grad;
      std::optional<nn::ForwardCache> bn_cache;
      if (model_cfg.use_batch_norm) {
        std::vector<const graph::GraphSample*> graphs;
        Eigen::Index rows = 0;
        for (auto i : members) {
          graphs.push_back(train_data[i].source);
          rows += train_data[i].features.rows();
        }
        RowMatrix features(rows, graph::kFeatureWidth);
        RowMatrix labels(rows, graph::kLabelWidth);
        Eigen::Index at = 0;
        for (auto i : members) {
          const Eigen::Index n = train_data[i].features.rows();
          features.middleRows(at, n) = train_data[i].features;
          labels.middleRows(at, n) = train_data[i].labels;
          at += n;
        }
        nn::Topology topo = nn::make_topology(graphs);
        norm.scale_edges(topo);
        nn::LossGradient lg = nn::loss_and_gradient(params, model_cfg, topo, features, labels, nn::Mode::training);
        grad = std::move(lg.grad);
        bn_cache = std::move(lg.cache);
      } else {
        grad = independent_gradient(params, model_cfg, train_data, members, cfg.workers);
      }
      if (cfg.freeze_trunk) {
        for (auto& [name, t] : grad.entries()) {
          if (!is_head(name)) std::fill(t.data.begin(), t.data.end(), 0.0);
        }
      }
      adam_step(params, grad, adam, lr);
      if (bn_cache && !cfg.freeze_trunk) nn::update_running_stats(params, model_cfg, *bn_cache);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    rec.train_mse = mean_mse(params, model_cfg, train_data, cfg.workers);
    rec.test_mse = mean_mse(params, model_cfg, test_data, cfg.workers);
    if (!std::isfinite(rec.train_mse)) throw NumericalError("training diverged at epoch " + std::to_string(rec.epoch));
    const double score = test_data.empty() ? rec.train_mse : rec.test_mse;
    if (score < best || report.epochs.empty()) {
      best = score;
      report.best_epoch = rec.epoch;
      result.best = params;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(rec);
    if (cfg.on_epoch) cfg.on_epoch(rec);
  }
  if (test_data.empty()) result.best = params;
  result.final = std::move(params);
  return result;
}

Metrics evaluate(const nn::ParamSet& params, const nn::ModelConfig& cfg, const std::vector<graph::GraphSample>& data,
                 int workers) {
  nn::check_compatible(params, cfg);
  if (data.empty()) throw InvalidArgument("evaluation set is empty");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].labels) throw InvalidArgument("sample " + std::to_string(i) + " has no labels");
  }
  const nn::Normalization norm = nn::normalization_of(params);
  Metrics m;
  m.sample_mse.resize(data.size());
  m.relative_l2.resize(data.size());
  parallel_for(data.size(), workers, [&](std::size_t i) {
    const auto& g = data[i];
    nn::Topology topo = nn::make_topology(g);
    norm.scale_edges(topo);
    const RowMatrix out = nn::forward<double>(params, cfg, topo, norm.features(g.features));
    m.sample_mse[i] = nn::mse_loss(out, norm.labels(*g.labels));
    const double ref = g.labels->norm();
    const double err = (norm.restore_labels(out) - *g.labels).norm();
    m.relative_l2[i] = ref > 0.0 ? err / ref : (err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  });
  for (std::size_t i = 0; i < data.size(); ++i) {
    m.mean_mse += m.sample_mse[i];
    m.mean_relative_l2 += m.relative_l2[i];
  }
  m.mean_mse /= static_cast<double>(data.size());
  m.mean_relative_l2 /= static_cast<double>(data.size());
  return m;
}

}  // namespace graphsolver::train
