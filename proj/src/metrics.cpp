#include "fedvuln/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "fedvuln/corpus.hpp"
#include "fedvuln/errors.hpp"

namespace fedvuln {

EvaluationReport report_from_confusion(const Confusion& c) {
  EvaluationReport r;
  r.confusion = c;
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  r.accuracy = ratio(c.tp + c.tn, c.total());
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

EvaluationReport evaluate(const std::vector<int>& predictions, const std::vector<int>& labels,
                          const std::vector<std::string>& categories) {
  if (predictions.size() != labels.size() || labels.size() != categories.size())
    fail(ErrorKind::Input, "evaluate needs equally long predictions, labels and categories");
  Confusion c;
  std::map<std::string, CategoryRate> per;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool actual = labels[i] == 1, predicted = predictions[i] == 1;
    if (labels[i] != 0 && labels[i] != 1) fail(ErrorKind::Input, "labels must be binary");
    if (predictions[i] != 0 && predictions[i] != 1) fail(ErrorKind::Input, "predictions must be binary");
    if (actual && predicted) ++c.tp;
    else if (!actual && predicted) ++c.fp;
    else if (!actual && !predicted) ++c.tn;
    else ++c.fn;
    auto& cat = per[categories[i]];
    ++cat.n_samples;
    if (actual == predicted) ++cat.n_detected;
  }
  for (auto& [_, cat] : per) cat.detection_rate = static_cast<double>(cat.n_detected) / static_cast<double>(cat.n_samples);
  auto r = report_from_confusion(c);
  r.per_category = std::move(per);
  return r;
}

ComparisonTable compare(const EvaluationReport& independent, const EvaluationReport& federated) {
  std::set<std::string> a, b;
  for (const auto& [k, _] : independent.per_category) a.insert(k);
  for (const auto& [k, _] : federated.per_category) b.insert(k);
  if (a != b) fail(ErrorKind::Input, "reports cover different category sets");
  ComparisonTable t;
  for (const auto& k : a)
    t.rows.push_back({k, independent.per_category.at(k).detection_rate, federated.per_category.at(k).detection_rate});
  std::stable_sort(t.rows.begin(), t.rows.end(),
                   [](const auto& x, const auto& y) { return x.improvement() < y.improvement(); });
  return t;
}

namespace {
std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
std::string pct(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}
}  // namespace

std::string report_csv(const EvaluationReport& r) {
  std::ostringstream os;
  os << "metric,value\n"
     << "accuracy," << num(r.accuracy) << "\nprecision," << num(r.precision) << "\nrecall," << num(r.recall)
     << "\nf1," << num(r.f1) << "\ntp," << r.confusion.tp << "\nfp," << r.confusion.fp << "\ntn," << r.confusion.tn
     << "\nfn," << r.confusion.fn << "\n\ncategory,n_samples,n_detected,detection_rate\n";
  for (const auto& [k, c] : r.per_category) os << k << ',' << c.n_samples << ',' << c.n_detected << ',' << num(c.detection_rate) << '\n';
  return os.str();
}

std::string comparison_csv(const ComparisonTable& t) {
  std::ostringstream os;
  os << "category,independent_rate,federated_rate,improvement\n";
  for (const auto& row : t.rows)
    os << row.category << ',' << num(row.independent_rate) << ',' << num(row.federated_rate) << ','
       << num(row.improvement()) << '\n';
  return os.str();
}

std::string comparison_text(const ComparisonTable& t) {
  std::ostringstream os;
  for (const auto& row : t.rows) {
    os << row.category << '\n'
       << "  independent  " << pct(row.independent_rate) << '\n'
       << "  federated    " << pct(row.federated_rate) << '\n'
       << "  improvement  " << pct(row.improvement()) << '\n';
  }
  return os.str();
}

}  // namespace fedvuln
