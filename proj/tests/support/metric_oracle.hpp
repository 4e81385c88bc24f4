#pragma once

// Brute-force metric definitions written directly from per-class counts.

#include <algorithm>
#include <cstddef>
#include <set>
#include <vector>

namespace cosmic::oracle {

struct Counts {
  double tp = 0, fp = 0, fn = 0, support = 0;
};

inline std::vector<Counts> count(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& labels,
                                 std::size_t classes) {
  std::vector<Counts> c(classes);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    c[labels[n]].support += 1;
    if (preds[n] == labels[n]) {
      c[labels[n]].tp += 1;
    } else {
      c[labels[n]].fn += 1;
      c[preds[n]].fp += 1;
    }
  }
  return c;
}

inline double f1(const Counts& c) {
  const double p = c.tp + c.fp > 0 ? c.tp / (c.tp + c.fp) : 0.0;
  const double r = c.tp + c.fn > 0 ? c.tp / (c.tp + c.fn) : 0.0;
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

inline double weighted_f1(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& labels,
                          std::size_t classes) {
  double total = 0;
  for (const Counts& c : count(preds, labels, classes)) total += c.support * f1(c);
  return total / static_cast<double>(labels.size());
}

inline double macro_f1(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& labels,
                       std::size_t classes) {
  std::set<std::size_t> present(labels.begin(), labels.end());
  present.insert(preds.begin(), preds.end());
  const auto c = count(preds, labels, classes);
  double total = 0;
  for (std::size_t k : present) total += f1(c[k]);
  return total / static_cast<double>(present.size());
}

// Drops every instance whose true class is excluded, then pools counts over
// the remaining classes.
inline double micro_f1_excluding(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& labels,
                                 std::size_t classes, const std::vector<std::size_t>& excluded) {
  std::vector<std::size_t> kp, kl;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (std::find(excluded.begin(), excluded.end(), labels[n]) != excluded.end()) continue;
    kp.push_back(preds[n]);
    kl.push_back(labels[n]);
  }
  if (kl.empty()) return 0.0;
  Counts pooled;
  const auto c = count(kp, kl, classes);
  for (std::size_t k = 0; k < classes; ++k) {
    if (std::find(excluded.begin(), excluded.end(), k) != excluded.end()) continue;
    pooled.tp += c[k].tp;
    pooled.fp += c[k].fp;
    pooled.fn += c[k].fn;
  }
  return f1(pooled);
}

inline double accuracy(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& labels) {
  double hit = 0;
  for (std::size_t n = 0; n < labels.size(); ++n) hit += preds[n] == labels[n];
  return hit / static_cast<double>(labels.size());
}

}  // namespace cosmic::oracle
