#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cosmic/dataset.hpp"
#include "cosmic/metrics.hpp"
#include "cosmic/model.hpp"

namespace cosmic {

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

struct EpochRecord {
  std::size_t epoch = 0;     // 0 = initial parameters, before any update
  double train_loss = 0.0;   // mean per-utterance cross-entropy; 0 for epoch 0
  double val_metric = 0.0;
  double val_accuracy = 0.0;
};

struct TrainConfig {
  std::size_t epochs = 50;
  double lr = 1e-4;
  std::uint64_t seed = 1;
  Ablation ablation;
  double dropout = 0.0;
  double clip_norm = 0.0;  // 0 disables clipping
  // Conversations whose summed gradients feed one Adam step. With more than
  // one, gradients are computed concurrently on `threads` workers.
  std::size_t conversations_per_step = 1;
  int threads = 1;
  std::string selection_metric;  // empty: the manifest's headline metric
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  CosmicParams best;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  std::vector<EpochRecord> history;
};

// Adam on summed conversation cross-entropy; keeps the parameters with the
// highest validation metric (earliest epoch wins ties).
TrainResult train(CosmicParams params, const Dataset& data, const DatasetManifest& manifest,
                  const TrainConfig& config);

// Backpropagates the summed cross-entropy of one conversation. Gradients are
// added to each parameter's grad() slot, or to `sinks` (aligned with
// named_parameters()) when given. Returns the loss.
double accumulate_gradients(CosmicParams& params, const Conversation& conv, const ForwardOptions& options,
                            std::vector<std::vector<double>>* sinks = nullptr);

struct SplitPredictions {
  std::vector<std::size_t> preds;
  std::vector<std::size_t> labels;
  std::vector<bool> shifted;
};

// Conversations are independent, so this parallelizes across them.
SplitPredictions predict_split(const CosmicParams& params, const std::vector<Conversation>& split,
                               const Ablation& ablation = {}, int threads = 1);

EvalReport evaluate(const CosmicParams& params, const std::vector<Conversation>& split,
                    const DatasetManifest& manifest, const Ablation& ablation = {}, int threads = 1);

std::string history_to_json(const TrainResult& result, const std::string& metric);

}  // namespace cosmic
