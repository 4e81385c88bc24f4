#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cosmic {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // true instances
  std::size_t predicted = 0;  // predicted instances
};

// confusion[true][pred]
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

ConfusionMatrix confusion_matrix(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                 std::size_t num_classes);

// Precision, recall and F1 with 0 for any 0/0 ratio.
std::vector<ClassScores> per_class_scores(const ConfusionMatrix& cm);

// Averages run over classes that occur in the labels or the predictions.
double weighted_f1(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t num_classes);
double macro_f1(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t num_classes);

// Micro F1 over the instances whose true label is not excluded. Among those,
// a wrong prediction is a false negative for its true class and a false
// positive only when the predicted class is itself not excluded. Dropping
// every instance of an excluded class therefore never changes the score.
// Returns 0 when no instance survives the exclusion.
double micro_f1_excluding(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                          std::size_t num_classes, std::span<const std::size_t> excluded);

double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels);

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<ClassScores> per_class;
  ConfusionMatrix confusion;
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;  // excluding the manifest's micro_f1_excluded classes
  double accuracy = 0.0;
  std::size_t count = 0;
  // Accuracy over utterances annotated as emotion shifts; -1 when none are.
  double shifted_accuracy = -1.0;
  std::size_t shifted_count = 0;

  // Looks up weighted_f1, macro_f1, micro_f1 or accuracy.
  double metric(const std::string& name) const;
};

EvalReport make_report(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                       const std::vector<std::string>& class_names, std::span<const std::size_t> excluded,
                       const std::vector<bool>& shifted = {});

std::string to_json(const EvalReport& report);

}  // namespace cosmic
