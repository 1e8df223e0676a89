// SPDX-License-Identifier: Apache-2.0
/**
 * @file   train.hpp
 * @brief  Cross-entropy loss, hand-derived backpropagation through the
 *         attention GRU, Adam, the minibatch loop and JSON checkpoints.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "newsattn/corpus.hpp"
#include "newsattn/evalx.hpp"
#include "newsattn/model.hpp"

namespace newsattn::train {

using model::ModelConfig;
using model::ModelParams;
using Gradients = ModelParams;

struct TrainConfig {
  std::size_t batch_size = 20;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::size_t epochs = 50;
  std::uint64_t seed = 42;
  bool shuffle = true;
  std::size_t threads = 1;

  void validate() const;
};

inline constexpr double kProbFloor = 1e-12;

/// -log(max(y[label], 1e-12)).
double cross_entropy(const numerics::Vector& probs, int label);

/// Exact gradient of cross_entropy(forward(...), label) for every tensor,
/// treating the trace's dropout mask as a constant.
Gradients backward(const model::DayMatrices& days, const model::ForwardTrace& trace, int label,
                   const ModelParams& params, const ModelConfig& config);
Gradients backward(const corpus::Window& window, const model::ForwardTrace& trace,
                   const ModelParams& params, const ModelConfig& config);

struct AdamState {
  ModelParams m;
  ModelParams v;
  std::uint64_t step = 0;

  static AdamState zeros(const ModelConfig& config);
};

/// One bias-corrected Adam update. Throws NumericalError naming the tensor
/// when a gradient is non-finite; params are left untouched in that case.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               const TrainConfig& config);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0;
  double train_acc = 0;
  double val_acc = 0;
  double val_mcc = 0;
  double val_loss = 0;  ///< tie-breaker for checkpoint selection, not logged
};

/// Counts label reads by purpose and split.
struct LabelAudit {
  std::size_t update_reads[3] = {0, 0, 0};
  std::size_t eval_reads[3] = {0, 0, 0};

  std::size_t updates(corpus::SplitKind k) const { return update_reads[static_cast<int>(k)]; }
  std::size_t evals(corpus::SplitKind k) const { return eval_reads[static_cast<int>(k)]; }
};

struct CheckpointMeta {
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  EpochMetrics metrics;
};

struct Checkpoint {
  int schema_version = 1;
  ModelConfig model;
  ModelParams params;
  CheckpointMeta meta;
};

struct TrainResult {
  Checkpoint best;  ///< highest validation accuracy, then lowest validation loss
  std::vector<EpochMetrics> log;
  LabelAudit audit;
};

/// Called after each epoch with its metrics and the current parameters.
using EpochCallback = std::function<void(const EpochMetrics&, const ModelParams&)>;

/// Per-epoch seeded shuffle of train, minibatch-mean gradients, Adam, then
/// accuracy/MCC on val. The test split is never read.
TrainResult train_loop(const corpus::Splits& splits, const ModelParams& init,
                       const TrainConfig& train_config, const ModelConfig& model_config,
                       const EpochCallback& on_epoch = {});

/// Mean gradient over windows[index]; windows are independent so the sum is
/// reduced in index order regardless of thread count.
Gradients batch_gradient(const std::vector<corpus::Window>& windows,
                         std::span<const std::size_t> indices, const ModelParams& params,
                         const ModelConfig& config, std::uint64_t dropout_seed,
                         std::size_t threads, double* mean_loss = nullptr,
                         std::size_t* correct = nullptr);

struct SplitEval {
  evalx::ConfusionMatrix confusion;
  double loss = 0;
};

SplitEval evaluate(const std::vector<corpus::Window>& windows, const ModelParams& params,
                   const ModelConfig& config);

std::string metrics_csv(const std::vector<EpochMetrics>& log);

std::string checkpoint_to_json(const Checkpoint& ckpt);
/// Throws InputError on parse, schema or shape errors.
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Loads and requires the stored config's shapes to match expected.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

/// Gradient check on one random tiny instance.
struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

struct GradCheckCase {
  ModelConfig config;  ///< dims of the random instance
  std::uint64_t seed = 1;
  int label = 1;
  std::size_t max_headlines = 4;
  bool force_empty_day = true;
  double eps = 1e-5;
};

GradCheckResult gradient_check(const GradCheckCase& c);

/// Relative error with denominator max(|a|, |b|, 1e-8).
double relative_error(double analytic, double numeric);

}  // namespace newsattn::train
