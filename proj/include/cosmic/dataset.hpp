#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cosmic/model.hpp"

namespace cosmic {

// One line of a feature file.
struct UtteranceRecord {
  std::string dialogue_id;
  std::size_t turn = 0;
  std::string speaker;
  std::size_t label = 0;
  FeatureBundle features;
  bool shift = false;  // synthetic-data annotation, optional in files

  friend bool operator==(const UtteranceRecord&, const UtteranceRecord&) = default;
};

// A validated dialogue: turns in order, speakers mapped to dense indices in
// order of first appearance.
struct Conversation {
  std::string id;
  std::vector<Turn> turns;
  std::vector<std::size_t> labels;
  std::vector<std::string> speakers;  // index -> original name
  std::vector<bool> shifted;          // per turn; all false unless annotated

  std::size_t size() const { return turns.size(); }
  std::size_t num_speakers() const { return speakers.size(); }
  friend bool operator==(const Conversation&, const Conversation&) = default;
};

struct Dataset {
  std::vector<Conversation> train, val, test;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class FeatureFormat { jsonl, packed };

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::filesystem::path train, val, test;  // resolved against the manifest's directory
  FeatureFormat format = FeatureFormat::jsonl;
  std::vector<std::string> micro_f1_excluded;
  std::optional<std::map<std::string, std::string>> coarse_grouping;  // fine -> coarse
  std::string headline_metric = "weighted_f1";

  std::size_t num_classes() const { return class_names.size(); }
  std::vector<std::size_t> excluded_indices() const;
  void validate() const;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
// Split paths are written relative to the manifest's directory when possible.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Record-per-line text format: one JSON object per line with keys
// dialogue_id, turn, speaker, label, x, cs_intent, cs_effect_speaker,
// cs_react_speaker, cs_effect_listener, cs_react_listener (and optionally
// shift). Blank lines are skipped. Doubles round-trip exactly.
std::vector<UtteranceRecord> read_records_jsonl(std::istream& in);
void write_records_jsonl(std::ostream& out, const std::vector<UtteranceRecord>& records);

// Packed binary format, little-endian:
//   magic "COSMFEAT" (8) | u32 version = 1 | u32 D_x | u32 D_cs | u64 count
//   per record: u32 len + dialogue_id | u32 turn | u32 len + speaker |
//               u32 label | f32 × D_x | f32 × D_cs × 5
// with the commonsense blocks in the order intent, effect_speaker,
// react_speaker, effect_listener, react_listener. Values are widened to
// double on load and narrowed to float on write; the shift flag is dropped.
std::vector<UtteranceRecord> read_records_packed(std::istream& in);
void write_records_packed(std::ostream& out, const std::vector<UtteranceRecord>& records);

std::vector<UtteranceRecord> read_records(const std::filesystem::path& path, FeatureFormat format);
void write_records(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records,
                   FeatureFormat format);

// Groups records by dialogue (first-appearance order) and validates turn
// contiguity, label range and uniform feature dimensions.
std::vector<Conversation> group_conversations(const std::vector<UtteranceRecord>& records,
                                              std::size_t num_classes);
std::vector<UtteranceRecord> flatten(const std::vector<Conversation>& conversations);

Dataset load_dataset(const DatasetManifest& manifest);
Dataset load_dataset(const std::filesystem::path& manifest_path);
// Writes train/val/test files plus manifest.json into `dir`.
void write_dataset(const std::filesystem::path& dir, const Dataset& data, DatasetManifest manifest);

struct FeatureDims {
  std::size_t utterance = 0;
  std::size_t commonsense = 0;
};
// Dimensions shared by every utterance; throws ValidationError if they differ.
FeatureDims feature_dims(const Dataset& data);

// Fine-to-coarse label remapping. Coarse classes are ordered by first
// appearance while scanning `class_names`.
struct Regrouped {
  std::vector<std::string> class_names;
  std::vector<std::size_t> fine_to_coarse;
};
Regrouped coarse_label_space(const std::vector<std::string>& class_names,
                             const std::map<std::string, std::string>& grouping);
std::vector<UtteranceRecord> regroup_labels(std::vector<UtteranceRecord> records, const Regrouped& mapping);
// Applies the manifest's grouping to every split; returns the coarse manifest.
DatasetManifest regroup_dataset(Dataset& data, const DatasetManifest& manifest);

// EmoryNLP 7 → 3 grouping.
std::map<std::string, std::string> emorynlp_coarse_grouping();

}  // namespace cosmic
