#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cosmic/trainer.hpp"

namespace cosmic {

struct AblationConfig {
  TrainConfig train;  // ablation and seed fields are overridden per run
  std::size_t hidden = 16;
  Mode mode = Mode::unidirectional;
  std::vector<std::uint64_t> seeds{1};
};

struct AblationRow {
  std::string name;
  Ablation ablation;
  std::vector<double> headline;          // test split, one per seed
  std::vector<double> accuracy;
  std::vector<double> shifted_accuracy;  // -1 when the data has no shift tags
  double mean_headline = 0.0;
  double mean_accuracy = 0.0;
  double mean_shifted_accuracy = -1.0;
};

// The four commonsense settings in fixed order: full, w/o speaker,
// w/o listener, w/o speaker and listener.
std::vector<std::pair<std::string, Ablation>> ablation_settings();

// Trains and evaluates each setting for every seed. Model init and training
// both use the run's seed, so all settings start from the same parameters.
std::vector<AblationRow> run_ablation(const Dataset& data, const DatasetManifest& manifest,
                                      const AblationConfig& config);

std::string format_ablation_table(const std::vector<AblationRow>& rows, const std::string& headline_metric);
std::string ablation_to_json(const std::vector<AblationRow>& rows, const std::string& headline_metric);

}  // namespace cosmic
