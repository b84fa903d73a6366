#include <doctest.h>

#include <random>

#include "fedvuln/errors.hpp"
#include "fedvuln/metrics.hpp"
#include "fedvuln/numkit.hpp"

using namespace fedvuln;

namespace {

EvaluationReport with_rates(const std::map<std::string, double>& rates) {
  EvaluationReport r;
  for (const auto& [k, v] : rates) r.per_category[k] = {100, 0, v};
  return r;
}

}  // namespace

TEST_CASE("worked example: tp=2 fp=1 fn=1 tn=6") {
  std::vector<int> pred, label;
  auto add = [&](int p, int y, int n) {
    for (int i = 0; i < n; ++i) {
      pred.push_back(p);
      label.push_back(y);
    }
  };
  add(1, 1, 2);
  add(1, 0, 1);
  add(0, 1, 1);
  add(0, 0, 6);
  std::vector<std::string> cats;
  for (int y : label) cats.push_back(y ? "CWE-20" : "secure");
  const auto r = evaluate(pred, label, cats);
  CHECK(r.confusion == Confusion{2, 1, 6, 1});
  CHECK(r.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.accuracy == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(r.per_category.at("CWE-20").detection_rate == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_category.at("secure").detection_rate == doctest::Approx(6.0 / 7.0));
}

TEST_CASE("edge cases") {
  const auto perfect = evaluate({1, 0, 1}, {1, 0, 1}, {"CWE-1", "secure", "CWE-2"});
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  const auto none = evaluate({0, 0, 0}, {1, 0, 1}, {"CWE-1", "secure", "CWE-2"});
  CHECK(none.precision == 0.0);
  CHECK(none.f1 == 0.0);
  try {
    evaluate({0, 1}, {0}, {"secure"});
    FAIL("expected input error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Input);
  }
  CHECK_THROWS_AS(evaluate({0}, {0}, {}), Error);
  CHECK_THROWS_AS(evaluate({2}, {0}, {"secure"}), Error);
}

TEST_CASE("brute-force oracle on 1,000 random cases") {
  Rng rng(77);
  const std::vector<std::string> cwes{"CWE-20", "CWE-787", "CWE-125"};
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<int> pred(n), label(n);
    std::vector<std::string> cats(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = int(rng() % 2);
      label[i] = int(rng() % 2);
      cats[i] = label[i] ? cwes[rng() % cwes.size()] : "secure";
    }
    Confusion c;
    std::map<std::string, std::pair<std::size_t, std::size_t>> per;
    for (std::size_t i = 0; i < n; ++i) {
      if (pred[i] == 1 && label[i] == 1) ++c.tp;
      if (pred[i] == 1 && label[i] == 0) ++c.fp;
      if (pred[i] == 0 && label[i] == 0) ++c.tn;
      if (pred[i] == 0 && label[i] == 1) ++c.fn;
      auto& [total, hit] = per[cats[i]];
      ++total;
      if (pred[i] == label[i]) ++hit;
    }
    const auto r = evaluate(pred, label, cats);
    REQUIRE(r.confusion == c);
    CHECK(r.accuracy == double(c.tp + c.tn) / double(n));
    const double p = c.tp + c.fp ? double(c.tp) / double(c.tp + c.fp) : 0.0;
    const double rc = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0.0;
    CHECK(r.precision == p);
    CHECK(r.recall == rc);
    CHECK(r.f1 == (p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0));
    std::size_t covered = 0;
    for (const auto& [k, v] : per) {
      CHECK(r.per_category.at(k).n_samples == v.first);
      CHECK(r.per_category.at(k).n_detected == v.second);
      covered += r.per_category.at(k).n_samples;
    }
    CHECK(covered == n);
    CHECK(r.per_category.size() == per.size());

    // Sample-weighted mean of vulnerable categories' rates equals recall.
    double weighted = 0, count = 0;
    for (const auto& [k, v] : r.per_category)
      if (k != "secure") {
        weighted += v.detection_rate * double(v.n_samples);
        count += double(v.n_samples);
      }
    if (count > 0) CHECK(std::abs(weighted / count - r.recall) <= 1e-12);
  }
}

TEST_CASE("compare reproduces the reference improvement arithmetic") {
  const auto indep = with_rates({{"CWE-189", 0.0970}, {"CWE-295", 0.0667}, {"secure", 0.9}});
  const auto fed = with_rates({{"CWE-189", 0.1152}, {"CWE-295", 0.7000}, {"secure", 0.9}});
  const auto t = compare(indep, fed);
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].category == "secure");
  CHECK(t.rows[0].improvement() == 0.0);
  CHECK(t.rows[1].category == "CWE-189");
  CHECK(t.rows[1].improvement() == doctest::Approx(0.0182).epsilon(1e-12));
  CHECK(t.rows[2].category == "CWE-295");
  CHECK(t.rows[2].improvement() == doctest::Approx(0.6333).epsilon(1e-12));
  const auto text = comparison_text(t);
  CHECK(text.find("1.82%") != std::string::npos);
  CHECK(text.find("63.33%") != std::string::npos);
  CHECK(text.find("9.70%") != std::string::npos);
  CHECK(text.find("70.00%") != std::string::npos);
  CHECK(comparison_csv(t).rfind("category,independent_rate,federated_rate,improvement\n", 0) == 0);
}

TEST_CASE("compare: identity, antisymmetry, mismatch") {
  const auto a = with_rates({{"CWE-20", 0.3}, {"CWE-787", 0.55}, {"secure", 0.8}});
  const auto b = with_rates({{"CWE-20", 0.6}, {"CWE-787", 0.25}, {"secure", 0.7}});
  for (const auto& row : compare(a, a).rows) CHECK(row.improvement() == 0.0);
  const auto ab = compare(a, b), ba = compare(b, a);
  for (const auto& row : ab.rows) {
    bool found = false;
    for (const auto& other : ba.rows)
      if (other.category == row.category) {
        CHECK(other.improvement() == -row.improvement());
        found = true;
      }
    CHECK(found);
  }
  for (std::size_t i = 1; i < ab.rows.size(); ++i) CHECK(ab.rows[i - 1].improvement() <= ab.rows[i].improvement());
  try {
    compare(a, with_rates({{"CWE-20", 0.3}}));
    FAIL("expected input error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Input);
  }
}

TEST_CASE("report CSV column order") {
  const auto r = evaluate({1, 0}, {1, 1}, {"CWE-20", "CWE-20"});
  const auto csv = report_csv(r);
  CHECK(csv.rfind("metric,value\naccuracy,0.5\nprecision,1\nrecall,0.5\n", 0) == 0);
  CHECK(csv.find("category,n_samples,n_detected,detection_rate\nCWE-20,2,1,0.5\n") != std::string::npos);
}
