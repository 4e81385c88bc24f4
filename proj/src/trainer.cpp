#include "cosmic/trainer.hpp"

#include <omp.h>

#include <algorithm>
#include <numeric>
#include <random>

#include <json.hpp>

#include "cosmic/adam.hpp"

namespace cosmic {

double accumulate_gradients(CosmicParams& params, const Conversation& conv, const ForwardOptions& options,
                            std::vector<std::vector<double>>* sinks) {
  ad::Tape tape;
  if (sinks) {
    auto named = params.named_parameters();
    if (sinks->size() != named.size()) throw UsageError("gradient sinks do not match the parameter list");
    for (std::size_t k = 0; k < named.size(); ++k) tape.redirect(*named[k].second, (*sinks)[k]);
  }
  const BoundModel model = bind(tape, params);
  const ForwardResult r = forward(tape, model, conv.turns, conv.num_speakers(), options);
  const ad::Var loss = conversation_loss(r.logits, conv.labels);
  tape.backward(loss);
  return loss.value()[0];
}

SplitPredictions predict_split(const CosmicParams& params, const std::vector<Conversation>& split,
                               const Ablation& ablation, int threads) {
  std::vector<std::vector<std::size_t>> per_conv(split.size());
  const auto n = static_cast<std::ptrdiff_t>(split.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(threads, 1))
  for (std::ptrdiff_t c = 0; c < n; ++c) {
    const Conversation& conv = split[static_cast<std::size_t>(c)];
    for (const Tensor& logits : infer_logits(params, conv.turns, ablation)) {
      per_conv[static_cast<std::size_t>(c)].push_back(predict(logits));
    }
  }
  SplitPredictions out;
  for (std::size_t c = 0; c < split.size(); ++c) {
    out.preds.insert(out.preds.end(), per_conv[c].begin(), per_conv[c].end());
    out.labels.insert(out.labels.end(), split[c].labels.begin(), split[c].labels.end());
    for (std::size_t t = 0; t < split[c].size(); ++t) {
      out.shifted.push_back(t < split[c].shifted.size() && split[c].shifted[t]);
    }
  }
  return out;
}

EvalReport evaluate(const CosmicParams& params, const std::vector<Conversation>& split,
                    const DatasetManifest& manifest, const Ablation& ablation, int threads) {
  const SplitPredictions p = predict_split(params, split, ablation, threads);
  const bool any_shift = std::find(p.shifted.begin(), p.shifted.end(), true) != p.shifted.end();
  return make_report(p.preds, p.labels, manifest.class_names, manifest.excluded_indices(),
                     any_shift ? p.shifted : std::vector<bool>{});
}

namespace {

std::mt19937_64 stream_for(std::uint64_t seed, std::size_t epoch, std::size_t position) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(position)};
  return std::mt19937_64(seq);
}

}  // namespace

TrainResult train(CosmicParams params, const Dataset& data, const DatasetManifest& manifest,
                  const TrainConfig& config) {
  if (data.train.empty()) throw UsageError("train: empty training split");
  if (data.val.empty()) throw UsageError("train: empty validation split");
  if (config.conversations_per_step == 0) throw UsageError("train: conversations_per_step must be positive");
  const std::string metric = config.selection_metric.empty() ? manifest.headline_metric : config.selection_metric;

  auto named = params.named_parameters();
  std::vector<Tensor*> tensors;
  for (auto& [name, t] : named) tensors.push_back(t);
  AdamState adam = make_adam_state(tensors, AdamConfig{.lr = config.lr});

  TrainResult result;
  const auto validate = [&](std::size_t epoch, double loss) {
    const EvalReport rep = evaluate(params, data.val, manifest, config.ablation, config.threads);
    EpochRecord rec{epoch, loss, rep.metric(metric), rep.accuracy};
    result.history.push_back(rec);
    if (epoch == 0 || rec.val_metric > result.best_metric) {
      result.best = params;
      result.best_epoch = epoch;
      result.best_metric = rec.val_metric;
    }
    if (config.on_epoch) config.on_epoch(rec);
  };
  validate(0, 0.0);

  std::mt19937_64 shuffle_rng(config.seed);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = config.conversations_per_step;

  std::vector<std::vector<std::vector<double>>> worker_grads;
  if (batch > 1) {
    worker_grads.resize(batch);
    for (auto& sinks : worker_grads)
      for (Tensor* t : tensors) sinks.emplace_back(t->size(), 0.0);
  }

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t utterances = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      params.zero_grad();
      std::vector<double> losses(count, 0.0);
      std::vector<std::string> failures(count);
      const auto run = [&](std::size_t j, std::vector<std::vector<double>>* sinks) {
        const Conversation& conv = data.train[order[start + j]];
        std::mt19937_64 rng = stream_for(config.seed, epoch, start + j);
        ForwardOptions opt{config.ablation, config.dropout, &rng};
        try {
          losses[j] = accumulate_gradients(params, conv, opt, sinks);
        } catch (const NumericError& e) {
          failures[j] = "epoch " + std::to_string(epoch) + ", conversation '" + conv.id + "': " + e.what();
        }
      };
      if (batch == 1) {
        run(0, nullptr);
      } else {
        for (auto& sinks : worker_grads)
          for (auto& g : sinks) std::fill(g.begin(), g.end(), 0.0);
#pragma omp parallel for schedule(dynamic) num_threads(std::max(config.threads, 1))
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(count); ++j) {
          run(static_cast<std::size_t>(j), &worker_grads[static_cast<std::size_t>(j)]);
        }
        for (std::size_t j = 0; j < count; ++j) {
          for (std::size_t k = 0; k < tensors.size(); ++k) {
            auto g = tensors[k]->grad();
            const auto& src = worker_grads[j][k];
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
          }
        }
      }
      for (std::size_t j = 0; j < count; ++j) {
        if (!failures[j].empty()) throw TrainingDiverged("non-finite value during training at " + failures[j]);
        epoch_loss += losses[j];
        utterances += data.train[order[start + j]].size();
      }
      const double norm = clip_grad_norm(tensors, config.clip_norm);
      if (!std::isfinite(norm)) throw TrainingDiverged("non-finite gradient norm in epoch " + std::to_string(epoch));
      adam_update(tensors, adam);
    }
    validate(epoch, epoch_loss / static_cast<double>(utterances));
  }
  params.zero_grad();
  for (auto& [name, t] : result.best.named_parameters()) t->drop_grad();
  return result;
}

std::string history_to_json(const TrainResult& result, const std::string& metric) {
  nlohmann::ordered_json j;
  j["selection_metric"] = metric;
  j["best_epoch"] = result.best_epoch;
  j["best_metric"] = result.best_metric;
  auto& epochs = j["epochs"];
  epochs = nlohmann::ordered_json::array();
  for (const EpochRecord& r : result.history) {
    nlohmann::ordered_json e;
    e["epoch"] = r.epoch;
    if (r.epoch > 0) e["train_loss"] = r.train_loss;
    e["val_metric"] = r.val_metric;
    e["val_accuracy"] = r.val_accuracy;
    epochs.push_back(std::move(e));
  }
  return j.dump(2);
}

}  // namespace cosmic
