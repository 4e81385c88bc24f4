#include "cosmic/ablation.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace cosmic {

std::vector<std::pair<std::string, Ablation>> ablation_settings() {
  return {{"full", {}},
          {"w/o speaker CSK", {.no_speaker = true}},
          {"w/o listener CSK", {.no_listener = true}},
          {"w/o speaker+listener CSK", {.no_speaker = true, .no_listener = true}}};
}

namespace {

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<AblationRow> run_ablation(const Dataset& data, const DatasetManifest& manifest,
                                      const AblationConfig& config) {
  if (config.seeds.empty()) throw UsageError("ablation: no seeds given");
  const FeatureDims fd = feature_dims(data);
  const ModelDims dims{fd.utterance, fd.commonsense, config.hidden, manifest.num_classes()};
  const std::string metric =
      config.train.selection_metric.empty() ? manifest.headline_metric : config.train.selection_metric;

  std::vector<AblationRow> rows;
  for (const auto& [name, ablation] : ablation_settings()) {
    AblationRow row{name, ablation, {}, {}, {}, 0.0, 0.0, -1.0};
    for (std::uint64_t seed : config.seeds) {
      TrainConfig tc = config.train;
      tc.seed = seed;
      tc.ablation = ablation;
      TrainResult result = train(CosmicParams::initialized(dims, config.mode, seed), data, manifest, tc);
      const EvalReport rep = evaluate(result.best, data.test, manifest, ablation, tc.threads);
      row.headline.push_back(rep.metric(metric));
      row.accuracy.push_back(rep.accuracy);
      row.shifted_accuracy.push_back(rep.shifted_accuracy);
    }
    row.mean_headline = mean(row.headline);
    row.mean_accuracy = mean(row.accuracy);
    if (row.shifted_accuracy.front() >= 0.0) row.mean_shifted_accuracy = mean(row.shifted_accuracy);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows, const std::string& headline_metric) {
  const bool extra_accuracy = headline_metric != "accuracy";
  std::ostringstream out;
  char cell[64];
  const auto put = [&](const char* f, auto v) {
    std::snprintf(cell, sizeof cell, f, v);
    out << cell;
  };
  put("%-26s", "setting");
  put(" %12s", headline_metric.c_str());
  if (extra_accuracy) put(" %10s", "accuracy");
  put(" %12s\n", "shifted acc");
  for (const AblationRow& r : rows) {
    put("%-26s", r.name.c_str());
    put(" %12.4f", r.mean_headline);
    if (extra_accuracy) put(" %10.4f", r.mean_accuracy);
    if (r.mean_shifted_accuracy >= 0.0) {
      put(" %12.4f\n", r.mean_shifted_accuracy);
    } else {
      put(" %12s\n", "-");
    }
  }
  return out.str();
}

std::string ablation_to_json(const std::vector<AblationRow>& rows, const std::string& headline_metric) {
  nlohmann::ordered_json j;
  j["headline_metric"] = headline_metric;
  auto& arr = j["rows"];
  arr = nlohmann::ordered_json::array();
  for (const AblationRow& r : rows) {
    nlohmann::ordered_json e;
    e["setting"] = r.name;
    e["no_speaker_cs"] = r.ablation.no_speaker;
    e["no_listener_cs"] = r.ablation.no_listener;
    e["headline"] = r.headline;
    e["accuracy"] = r.accuracy;
    e["mean_headline"] = r.mean_headline;
    e["mean_accuracy"] = r.mean_accuracy;
    if (r.mean_shifted_accuracy >= 0.0) {
      e["shifted_accuracy"] = r.shifted_accuracy;
      e["mean_shifted_accuracy"] = r.mean_shifted_accuracy;
    }
    arr.push_back(std::move(e));
  }
  return j.dump(2);
}

}  // namespace cosmic
