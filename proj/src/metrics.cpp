#include "cosmic/metrics.hpp"

#include <algorithm>

#include <json.hpp>

#include "cosmic/errors.hpp"

namespace cosmic {

namespace {

void require_pairs(std::span<const std::size_t> preds, std::span<const std::size_t> labels) {
  if (preds.size() != labels.size()) throw UsageError("metrics: predictions and labels differ in length");
  if (preds.empty()) throw UsageError("metrics: empty input");
}

double f1_of(double tp, double fp, double fn) {
  const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                 std::size_t num_classes) {
  require_pairs(preds, labels);
  ConfusionMatrix cm(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] >= num_classes || preds[i] >= num_classes) throw UsageError("metrics: class index out of range");
    ++cm[labels[i]][preds[i]];
  }
  return cm;
}

std::vector<ClassScores> per_class_scores(const ConfusionMatrix& cm) {
  const std::size_t c = cm.size();
  std::vector<ClassScores> out(c);
  for (std::size_t k = 0; k < c; ++k) {
    std::size_t support = 0, predicted = 0;
    for (std::size_t j = 0; j < c; ++j) {
      support += cm[k][j];
      predicted += cm[j][k];
    }
    const double tp = static_cast<double>(cm[k][k]);
    ClassScores& s = out[k];
    s.support = support;
    s.predicted = predicted;
    s.precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
    s.recall = support ? tp / static_cast<double>(support) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  }
  return out;
}

double weighted_f1(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t num_classes) {
  const auto scores = per_class_scores(confusion_matrix(preds, labels, num_classes));
  double total = 0.0;
  for (const ClassScores& s : scores) total += static_cast<double>(s.support) * s.f1;
  return total / static_cast<double>(labels.size());
}

double macro_f1(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t num_classes) {
  const auto scores = per_class_scores(confusion_matrix(preds, labels, num_classes));
  double total = 0.0;
  std::size_t present = 0;
  for (const ClassScores& s : scores) {
    if (s.support == 0 && s.predicted == 0) continue;
    total += s.f1;
    ++present;
  }
  return total / static_cast<double>(present);
}

double micro_f1_excluding(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                          std::size_t num_classes, std::span<const std::size_t> excluded) {
  require_pairs(preds, labels);
  std::vector<bool> skip(num_classes, false);
  for (std::size_t k : excluded) {
    if (k >= num_classes) throw UsageError("metrics: excluded class out of range");
    skip[k] = true;
  }
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] >= num_classes || preds[i] >= num_classes) throw UsageError("metrics: class index out of range");
    if (skip[labels[i]]) continue;
    if (preds[i] == labels[i]) {
      ++tp;
    } else {
      ++fn;
      if (!skip[preds[i]]) ++fp;
    }
  }
  return f1_of(tp, fp, fn);
}

double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels) {
  require_pairs(preds, labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double EvalReport::metric(const std::string& name) const {
  if (name == "weighted_f1") return weighted_f1;
  if (name == "macro_f1") return macro_f1;
  if (name == "micro_f1") return micro_f1;
  if (name == "accuracy") return accuracy;
  throw UsageError("unknown metric '" + name + "'");
}

EvalReport make_report(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                       const std::vector<std::string>& class_names, std::span<const std::size_t> excluded,
                       const std::vector<bool>& shifted) {
  const std::size_t c = class_names.size();
  EvalReport r;
  r.class_names = class_names;
  r.confusion = confusion_matrix(preds, labels, c);
  r.per_class = per_class_scores(r.confusion);
  r.weighted_f1 = cosmic::weighted_f1(preds, labels, c);
  r.macro_f1 = cosmic::macro_f1(preds, labels, c);
  r.micro_f1 = micro_f1_excluding(preds, labels, c, excluded);
  r.accuracy = cosmic::accuracy(preds, labels);
  r.count = preds.size();
  if (!shifted.empty()) {
    if (shifted.size() != preds.size()) throw UsageError("metrics: shift annotations differ in length");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (!shifted[i]) continue;
      ++r.shifted_count;
      hits += preds[i] == labels[i];
    }
    if (r.shifted_count) r.shifted_accuracy = static_cast<double>(hits) / static_cast<double>(r.shifted_count);
  }
  return r;
}

std::string to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["count"] = r.count;
  j["accuracy"] = r.accuracy;
  j["weighted_f1"] = r.weighted_f1;
  j["macro_f1"] = r.macro_f1;
  j["micro_f1"] = r.micro_f1;
  if (r.shifted_count) {
    j["shifted_count"] = r.shifted_count;
    j["shifted_accuracy"] = r.shifted_accuracy;
  }
  auto& classes = j["per_class"];
  classes = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < r.per_class.size(); ++k) {
    const ClassScores& s = r.per_class[k];
    classes.push_back({{"class", r.class_names[k]},
                       {"precision", s.precision},
                       {"recall", s.recall},
                       {"f1", s.f1},
                       {"support", s.support}});
  }
  j["confusion"] = r.confusion;
  return j.dump(2);
}

}  // namespace cosmic
