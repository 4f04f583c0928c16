#pragma once

#include "graphsolver/nn.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace graphsolver::train {

struct EpochRecord;

struct TrainConfig {
  int epochs = 300;
  double base_lr = 1e-3;
  double decay = 0.8;
  int decay_every = 20;
  /// Graphs per optimizer step.
  int batch_size = 8;
  std::uint64_t seed = 0;
  bool use_batch_norm = false;
  /// Parameter container to start from instead of a fresh initialization.
  std::optional<std::string> warm_start;
  /// Update only the six output heads.
  bool freeze_trunk = false;
  /// Standardize features and labels with training-set statistics.
  bool normalize = true;
  int workers = 1;
  /// Called after every epoch; may be empty.
  std::function<void(const EpochRecord&)> on_epoch;

  void validate() const;
};

/// base_lr * decay^floor(epoch / decay_every).
double lr_schedule(int epoch, const TrainConfig& cfg);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  nn::ParamSet m;
  nn::ParamSet v;

  static AdamState for_params(const nn::ParamSet& params);
};

/// One bias-corrected Adam update of the trainable tensors.
void adam_step(nn::ParamSet& params, const nn::ParamSet& grads, AdamState& state, double lr);

struct EpochRecord {
  int epoch = 0;  // 1-based, after the epoch's updates
  double train_mse = 0.0;
  double test_mse = 0.0;  // NaN without a test set
  double lr = 0.0;
  double seconds = 0.0;  // wall time, logged but kept out of the CSV
};

struct TrainReport {
  double initial_train_mse = 0.0;
  double initial_test_mse = 0.0;
  double initial_lr = 0.0;
  int best_epoch = 0;
  std::vector<EpochRecord> epochs;
};

/// "epoch,train_mse,test_mse,lr" with 17 significant digits; row 0 holds the
/// untrained model.
void write_report_csv(const TrainReport& report, std::ostream& out);
void write_report_csv_file(const TrainReport& report, const std::string& path);

struct TrainResult {
  nn::ModelConfig model;
  nn::ParamSet best;   // lowest test MSE (final when there is no test set)
  nn::ParamSet final;  // after the last epoch
  TrainReport report;
};

/// MSE values are in the model's normalized label space.
TrainResult train(const std::vector<graph::GraphSample>& train_set, const std::vector<graph::GraphSample>& test_set,
                  const TrainConfig& cfg, nn::ModelConfig model_cfg);

struct Metrics {
  double mean_mse = 0.0;
  std::vector<double> sample_mse;
  /// ||J_pred - J_ref|| / ||J_ref|| per sample in physical units.
  std::vector<double> relative_l2;
  double mean_relative_l2 = 0.0;
};

Metrics evaluate(const nn::ParamSet& params, const nn::ModelConfig& cfg, const std::vector<graph::GraphSample>& data,
                 int workers = 1);

/// Testing MSE quoted for basic targets by the original GraphSolver study.
/// A reference scale only; desk-sized runs are not expected to reach it.
inline constexpr double kReferenceTestMse = 0.0015;

}  // namespace graphsolver::train
