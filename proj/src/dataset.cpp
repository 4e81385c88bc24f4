#include "cosmic/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "cosmic/binary_io.hpp"

namespace cosmic {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::set<std::string> kHeadlineMetrics = {"weighted_f1", "macro_f1", "micro_f1", "accuracy"};

constexpr char kPackedMagic[8] = {'C', 'O', 'S', 'M', 'F', 'E', 'A', 'T'};
constexpr std::uint32_t kPackedVersion = 1;

struct ChannelKey {
  const char* key;
  Tensor FeatureBundle::*member;
};

constexpr ChannelKey kChannels[] = {
    {"x", &FeatureBundle::utterance},
    {"cs_intent", &FeatureBundle::intent},
    {"cs_effect_speaker", &FeatureBundle::effect_speaker},
    {"cs_react_speaker", &FeatureBundle::react_speaker},
    {"cs_effect_listener", &FeatureBundle::effect_listener},
    {"cs_react_listener", &FeatureBundle::react_listener},
};

Tensor row_from_json(const json& j, const char* key) {
  if (!j.is_array() || j.empty()) throw ParseError(std::string("'") + key + "' must be a non-empty array");
  std::vector<double> v;
  v.reserve(j.size());
  for (const json& e : j) {
    if (!e.is_number()) throw ParseError(std::string("'") + key + "' holds a non-numeric entry");
    v.push_back(e.get<double>());
  }
  Tensor t = Tensor::row(std::move(v));
  if (!t.all_finite()) throw ParseError(std::string("'") + key + "' holds a non-finite value");
  return t;
}

std::size_t index_from_json(const json& obj, const char* key) {
  const json& j = obj.at(key);
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw ParseError(std::string("'") + key + "' must be a non-negative integer");
  }
  return j.get<std::size_t>();
}

}  // namespace

std::vector<std::size_t> DatasetManifest::excluded_indices() const {
  std::vector<std::size_t> out;
  for (const std::string& name : micro_f1_excluded) {
    auto it = std::find(class_names.begin(), class_names.end(), name);
    if (it == class_names.end()) throw ValidationError("excluded class '" + name + "' is not a class name");
    out.push_back(static_cast<std::size_t>(it - class_names.begin()));
  }
  return out;
}

void DatasetManifest::validate() const {
  if (class_names.empty()) throw ValidationError("manifest lists no classes");
  const std::set<std::string> names(class_names.begin(), class_names.end());
  if (names.size() != class_names.size()) throw ValidationError("manifest class names are not unique");
  excluded_indices();
  if (coarse_grouping) {
    for (const auto& [fine, coarse] : *coarse_grouping) {
      if (!names.contains(fine)) throw ValidationError("grouping names unknown class '" + fine + "'");
    }
    for (const std::string& name : class_names) {
      if (!coarse_grouping->contains(name)) throw ValidationError("grouping leaves class '" + name + "' unmapped");
    }
  }
  if (!kHeadlineMetrics.contains(headline_metric)) {
    throw ValidationError("unknown headline metric '" + headline_metric + "'");
  }
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    const fs::path base = path.parent_path();
    const json& splits = j.at("splits");
    m.train = base / splits.at("train").get<std::string>();
    m.val = base / splits.at("val").get<std::string>();
    m.test = base / splits.at("test").get<std::string>();
    const std::string format = j.value("format", "jsonl");
    if (format == "jsonl") {
      m.format = FeatureFormat::jsonl;
    } else if (format == "packed") {
      m.format = FeatureFormat::packed;
    } else {
      throw ValidationError("unknown feature format '" + format + "'");
    }
    m.micro_f1_excluded = j.value("micro_f1_excluded", std::vector<std::string>{});
    if (j.contains("coarse_grouping") && !j.at("coarse_grouping").is_null()) {
      m.coarse_grouping = j.at("coarse_grouping").get<std::map<std::string, std::string>>();
    }
    m.headline_metric = j.value("headline_metric", "weighted_f1");
  } catch (const json::exception& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  const fs::path base = path.parent_path();
  const auto rel = [&](const fs::path& p) {
    return base.empty() ? p.generic_string() : p.lexically_relative(base).generic_string();
  };
  json j;
  j["class_names"] = m.class_names;
  j["splits"] = {{"train", rel(m.train)}, {"val", rel(m.val)}, {"test", rel(m.test)}};
  j["format"] = m.format == FeatureFormat::jsonl ? "jsonl" : "packed";
  j["micro_f1_excluded"] = m.micro_f1_excluded;
  j["coarse_grouping"] = m.coarse_grouping ? json(*m.coarse_grouping) : json(nullptr);
  j["headline_metric"] = m.headline_metric;
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<UtteranceRecord> read_records_jsonl(std::istream& in) {
  std::vector<UtteranceRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json obj = json::parse(line);
      if (!obj.is_object()) throw ParseError("record is not an object");
      UtteranceRecord r;
      r.dialogue_id = obj.at("dialogue_id").get<std::string>();
      r.turn = index_from_json(obj, "turn");
      r.speaker = obj.at("speaker").get<std::string>();
      r.label = index_from_json(obj, "label");
      for (const ChannelKey& c : kChannels) r.features.*c.member = row_from_json(obj.at(c.key), c.key);
      r.shift = obj.value("shift", false);
      records.push_back(std::move(r));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return records;
}

void write_records_jsonl(std::ostream& out, const std::vector<UtteranceRecord>& records) {
  for (const UtteranceRecord& r : records) {
    json obj;
    obj["dialogue_id"] = r.dialogue_id;
    obj["turn"] = r.turn;
    obj["speaker"] = r.speaker;
    obj["label"] = r.label;
    for (const ChannelKey& c : kChannels) obj[c.key] = (r.features.*c.member).values();
    if (r.shift) obj["shift"] = true;
    out << obj.dump() << '\n';
  }
}

std::vector<UtteranceRecord> read_records_packed(std::istream& in) {
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty()) return {};
  binary::Reader r(bytes.data(), bytes.size());
  if (r.bytes(sizeof kPackedMagic) != std::string_view(kPackedMagic, sizeof kPackedMagic)) {
    throw ParseError("not a packed feature file: bad magic");
  }
  if (const auto version = r.u32(); version != kPackedVersion) {
    throw ParseError("unsupported packed feature version " + std::to_string(version));
  }
  const std::size_t d_x = r.u32();
  const std::size_t d_cs = r.u32();
  const std::uint64_t count = r.u64();
  if (count > 0 && (d_x == 0 || d_cs == 0)) throw ParseError("packed feature header has zero dimension");
  const auto read_row = [&](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = static_cast<double>(r.f32());
    Tensor t = Tensor::row(std::move(v));
    if (!t.all_finite()) throw ParseError("packed record holds a non-finite value");
    return t;
  };
  std::vector<UtteranceRecord> records;
  records.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    UtteranceRecord rec;
    rec.dialogue_id = r.str();
    rec.turn = r.u32();
    rec.speaker = r.str();
    rec.label = r.u32();
    rec.features.utterance = read_row(d_x);
    for (std::size_t c = 1; c < std::size(kChannels); ++c) rec.features.*kChannels[c].member = read_row(d_cs);
    records.push_back(std::move(rec));
  }
  if (!r.at_end()) throw ParseError("trailing bytes after packed records");
  return records;
}

void write_records_packed(std::ostream& out, const std::vector<UtteranceRecord>& records) {
  binary::Writer w;
  w.bytes(std::string_view(kPackedMagic, sizeof kPackedMagic));
  w.u32(kPackedVersion);
  const std::size_t d_x = records.empty() ? 0 : records.front().features.utterance.size();
  const std::size_t d_cs = records.empty() ? 0 : records.front().features.intent.size();
  w.u32(static_cast<std::uint32_t>(d_x));
  w.u32(static_cast<std::uint32_t>(d_cs));
  w.u64(records.size());
  for (const UtteranceRecord& r : records) {
    r.features.validate(d_x, d_cs);
    w.str(r.dialogue_id);
    w.u32(static_cast<std::uint32_t>(r.turn));
    w.str(r.speaker);
    w.u32(static_cast<std::uint32_t>(r.label));
    for (const ChannelKey& c : kChannels) {
      for (double v : (r.features.*c.member).data()) w.f32(static_cast<float>(v));
    }
  }
  const auto& buf = w.buffer();
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

std::vector<UtteranceRecord> read_records(const fs::path& path, FeatureFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file " + path.string());
  try {
    return format == FeatureFormat::jsonl ? read_records_jsonl(in) : read_records_packed(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_records(const fs::path& path, const std::vector<UtteranceRecord>& records, FeatureFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write feature file " + path.string());
  if (format == FeatureFormat::jsonl) {
    write_records_jsonl(out, records);
  } else {
    write_records_packed(out, records);
  }
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<Conversation> group_conversations(const std::vector<UtteranceRecord>& records,
                                              std::size_t num_classes) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const UtteranceRecord*>> by_dialogue;
  for (const UtteranceRecord& r : records) {
    auto [it, inserted] = by_dialogue.try_emplace(r.dialogue_id);
    if (inserted) order.push_back(r.dialogue_id);
    it->second.push_back(&r);
  }

  std::size_t d_x = 0, d_cs = 0;
  std::vector<Conversation> out;
  out.reserve(order.size());
  for (const std::string& id : order) {
    auto& rows = by_dialogue[id];
    std::stable_sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->turn < b->turn; });
    Conversation conv;
    conv.id = id;
    std::unordered_map<std::string, std::size_t> speaker_index;
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const UtteranceRecord& r = *rows[t];
      if (r.turn != t) {
        throw ValidationError("dialogue '" + id + "': turns are not contiguous 0.." +
                              std::to_string(rows.size() - 1) + " (found turn " + std::to_string(r.turn) + ")");
      }
      if (r.label >= num_classes) {
        throw ValidationError("dialogue '" + id + "' turn " + std::to_string(t) + ": label " +
                              std::to_string(r.label) + " outside " + std::to_string(num_classes) + " classes");
      }
      if (d_x == 0) {
        d_x = r.features.utterance.size();
        d_cs = r.features.intent.size();
      }
      try {
        r.features.validate(d_x, d_cs);
      } catch (const DimensionError& e) {
        throw ValidationError("dialogue '" + id + "' turn " + std::to_string(t) + ": " + e.what());
      }
      auto [it, inserted] = speaker_index.try_emplace(r.speaker, conv.speakers.size());
      if (inserted) conv.speakers.push_back(r.speaker);
      conv.turns.push_back(Turn{r.features, it->second});
      conv.labels.push_back(r.label);
      conv.shifted.push_back(r.shift);
    }
    out.push_back(std::move(conv));
  }
  return out;
}

std::vector<UtteranceRecord> flatten(const std::vector<Conversation>& conversations) {
  std::vector<UtteranceRecord> out;
  for (const Conversation& c : conversations) {
    for (std::size_t t = 0; t < c.size(); ++t) {
      out.push_back(UtteranceRecord{c.id, t, c.speakers.at(c.turns[t].speaker), c.labels[t], c.turns[t].features,
                                    t < c.shifted.size() && c.shifted[t]});
    }
  }
  return out;
}

Dataset load_dataset(const DatasetManifest& manifest) {
  manifest.validate();
  const std::size_t c = manifest.num_classes();
  Dataset d;
  d.train = group_conversations(read_records(manifest.train, manifest.format), c);
  d.val = group_conversations(read_records(manifest.val, manifest.format), c);
  d.test = group_conversations(read_records(manifest.test, manifest.format), c);
  feature_dims(d);
  return d;
}

Dataset load_dataset(const fs::path& manifest_path) { return load_dataset(read_manifest(manifest_path)); }

void write_dataset(const fs::path& dir, const Dataset& data, DatasetManifest manifest) {
  fs::create_directories(dir);
  const char* ext = manifest.format == FeatureFormat::jsonl ? ".jsonl" : ".bin";
  manifest.train = dir / (std::string("train") + ext);
  manifest.val = dir / (std::string("val") + ext);
  manifest.test = dir / (std::string("test") + ext);
  write_records(manifest.train, flatten(data.train), manifest.format);
  write_records(manifest.val, flatten(data.val), manifest.format);
  write_records(manifest.test, flatten(data.test), manifest.format);
  write_manifest(dir / "manifest.json", manifest);
}

FeatureDims feature_dims(const Dataset& data) {
  FeatureDims dims;
  for (const auto* split : {&data.train, &data.val, &data.test}) {
    for (const Conversation& c : *split) {
      for (const Turn& t : c.turns) {
        if (dims.utterance == 0) dims = {t.features.utterance.size(), t.features.intent.size()};
        try {
          t.features.validate(dims.utterance, dims.commonsense);
        } catch (const DimensionError& e) {
          throw ValidationError("dialogue '" + c.id + "': " + e.what());
        }
      }
    }
  }
  return dims;
}

Regrouped coarse_label_space(const std::vector<std::string>& class_names,
                             const std::map<std::string, std::string>& grouping) {
  Regrouped out;
  for (const std::string& fine : class_names) {
    auto it = grouping.find(fine);
    if (it == grouping.end()) throw ValidationError("fine class '" + fine + "' has no coarse group");
    auto pos = std::find(out.class_names.begin(), out.class_names.end(), it->second);
    if (pos == out.class_names.end()) {
      out.class_names.push_back(it->second);
      pos = out.class_names.end() - 1;
    }
    out.fine_to_coarse.push_back(static_cast<std::size_t>(pos - out.class_names.begin()));
  }
  return out;
}

std::vector<UtteranceRecord> regroup_labels(std::vector<UtteranceRecord> records, const Regrouped& mapping) {
  for (UtteranceRecord& r : records) {
    if (r.label >= mapping.fine_to_coarse.size()) {
      throw ValidationError("label " + std::to_string(r.label) + " has no coarse group");
    }
    r.label = mapping.fine_to_coarse[r.label];
  }
  return records;
}

DatasetManifest regroup_dataset(Dataset& data, const DatasetManifest& manifest) {
  if (!manifest.coarse_grouping) throw UsageError("manifest defines no coarse grouping");
  const Regrouped mapping = coarse_label_space(manifest.class_names, *manifest.coarse_grouping);
  for (auto* split : {&data.train, &data.val, &data.test}) {
    for (Conversation& c : *split) {
      for (std::size_t& label : c.labels) {
        if (label >= mapping.fine_to_coarse.size()) {
          throw ValidationError("label " + std::to_string(label) + " has no coarse group");
        }
        label = mapping.fine_to_coarse[label];
      }
    }
  }
  DatasetManifest coarse = manifest;
  coarse.class_names = mapping.class_names;
  coarse.coarse_grouping.reset();
  std::vector<std::string> excluded;
  for (const std::string& name : manifest.micro_f1_excluded) {
    const std::string& group = manifest.coarse_grouping->at(name);
    if (std::find(excluded.begin(), excluded.end(), group) == excluded.end()) excluded.push_back(group);
  }
  coarse.micro_f1_excluded = excluded;
  return coarse;
}

std::map<std::string, std::string> emorynlp_coarse_grouping() {
  return {{"joyful", "positive"}, {"peaceful", "positive"}, {"powerful", "positive"},
          {"scared", "negative"}, {"mad", "negative"},      {"sad", "negative"},
          {"neutral", "neutral"}};
}

}  // namespace cosmic
