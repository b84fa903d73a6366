#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace fedvuln {

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct CategoryRate {
  std::size_t n_samples = 0;
  std::size_t n_detected = 0;  // vulnerable predicted vulnerable, or secure predicted secure
  double detection_rate = 0.0;
  bool operator==(const CategoryRate&) const = default;
};

/// Binary metrics with vulnerable (label 1) as the positive class.
struct EvaluationReport {
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
  Confusion confusion;
  std::map<std::string, CategoryRate> per_category;

  bool operator==(const EvaluationReport&) const = default;
};

/// `categories[i]` is "secure" or the CWE tag of sample i.
EvaluationReport evaluate(const std::vector<int>& predictions, const std::vector<int>& labels,
                          const std::vector<std::string>& categories);

EvaluationReport report_from_confusion(const Confusion& c);

struct ComparisonRow {
  std::string category;
  double independent_rate = 0.0;
  double federated_rate = 0.0;
  double improvement() const { return federated_rate - independent_rate; }
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;  // ascending by improvement, then by category
};

ComparisonTable compare(const EvaluationReport& independent, const EvaluationReport& federated);

// CSV column order (stable):
//   report:     metric,value  then  category,n_samples,n_detected,detection_rate
//   comparison: category,independent_rate,federated_rate,improvement
std::string report_csv(const EvaluationReport& r);
std::string comparison_csv(const ComparisonTable& t);
/// Three rows per category (independent / federated / improvement), percentages.
std::string comparison_text(const ComparisonTable& t);

}  // namespace fedvuln
