// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance [demo-config.json]
//
// Criteria 7-10 run on the bundled synthetic corpus described by the demo
// config (configs/demo.json unless another path is given).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fedvuln/commands.hpp"
#include "fedvuln/config.hpp"
#include "fedvuln/metrics.hpp"
#include "fedvuln/numkit.hpp"
#include "fedvuln/partition.hpp"
#include "fedvuln/peft.hpp"
#include "fedvuln/serialize.hpp"
#include "support.hpp"

#ifndef FEDVULN_DEMO_CONFIG
#define FEDVULN_DEMO_CONFIG "configs/demo.json"
#endif

using namespace fedvuln;
using namespace fedvuln::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects failure messages; the first few are echoed in the detail line.
struct Checker {
  std::size_t checks = 0;
  std::vector<std::string> failures;

  void operator()(bool ok, const std::string& what) {
    ++checks;
    if (!ok) failures.push_back(what);
  }
  Outcome outcome(const std::string& summary) const {
    Outcome o{failures.empty(), summary + " (" + std::to_string(checks) + " checks)"};
    for (std::size_t i = 0; i < failures.size() && i < 3; ++i) o.detail += "; failed: " + failures[i];
    return o;
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string percent(double v) { return fmt("%.2f", 100.0 * v); }

double max_logit_gap(const ParamSet& a, const ParamSet& b, const Batch& batch) {
  const auto la = forward(a, batch).logits, lb = forward(b, batch).logits;
  double worst = 0;
  for (std::size_t i = 0; i < la.values.size(); ++i) worst = std::max(worst, std::abs(la.values[i] - lb.values[i]));
  return worst;
}

// ---------------------------------------------------------------------------
// 1. Gradient suite

Outcome gradient_suite() {
  const auto start = std::chrono::steady_clock::now();
  const auto batch = toy_batch(50, 6, 11);
  double worst = 0.0;
  Checker check;
  for (auto kind : all_schemes()) {
    auto p = attach(scheme_of(kind), init(small_config(3, 50, 8, 2, 12)));
    perturb_hot(p, 21);
    auto global = p, prev = p;
    perturb_hot(global, 22);
    perturb_hot(prev, 23);
    const std::vector<std::pair<std::string, HookList>> hooks{
        {"none", {}},
        {"fedprox", {std::make_shared<ProximalHook>(hot_vector(global), 0.7)}},
        {"moon", {std::make_shared<ContrastiveHook>(global, prev, 0.5, 1.0)}},
    };
    for (const auto& [name, h] : hooks) {
      const double err = worst_gradient_error(p, batch, h);
      worst = std::max(worst, err);
      check(err < 1e-4, to_string(kind) + "/" + name + " rel err " + fmt("%.3g", err));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  check(secs < 60.0, "runtime " + fmt("%.1f s", secs));
  return check.outcome("6 schemes x 3 hooks, worst relative error " + fmt("%.2e", worst) + " < 1e-4, " +
                       fmt("%.2f s", secs));
}

// ---------------------------------------------------------------------------
// 2. Aggregation identities (20 seeded rounds each)

FederationConfig small_federation(Algorithm algo, std::size_t rounds, std::uint64_t seed) {
  FederationConfig c;
  c.n_clients = 4;
  c.rounds = rounds;
  c.select_fraction = 0.75;
  c.local_epochs = 1;
  c.batch_size = 4;
  c.learning_rate = 0.3;
  c.algorithm = algo;
  c.seed = seed;
  c.workers = 1;
  return c;
}

std::vector<LabeledData> small_clients() {
  std::vector<LabeledData> out;
  for (std::size_t c = 0; c < 4; ++c) out.push_back(labeled_from(toy_batch(50, 6 + c, 100 + c)));
  return out;
}

Outcome aggregation_identities() {
  Checker check;
  const std::size_t rounds = 20;
  const auto model = attach(scheme_of(SchemeKind::Full), init(small_config()));
  const auto clients = small_clients();
  const auto test = labeled_from(toy_batch(50, 20, 55));

  // FedAvg idempotence: averaging k copies of the round's global returns it.
  double idem = 0.0;
  std::vector<FlatVector> fedavg_globals;
  std::vector<double> fedavg_losses;
  run_federation(small_federation(Algorithm::FedAvg, rounds, 7), model, clients, test,
                 [&](const RoundTrace& tr, const RoundState& st) {
                   const auto g = hot_vector(st.global);
                   std::vector<RoundUpdate> copies;
                   for (std::size_t k = 0; k < tr.selected.size(); ++k)
                     copies.push_back({tr.selected[k], g, clients[tr.selected[k]].size(), 0.0});
                   const auto again = aggregate_fedavg(copies);
                   for (std::size_t i = 0; i < g.size(); ++i) idem = std::max(idem, std::abs(again[i] - g[i]));
                   fedavg_globals.push_back(g);
                   fedavg_losses.push_back(tr.mean_train_loss);
                 });
  check(idem <= 1e-12, "fedavg idempotence " + fmt("%.3g", idem));

  // Degenerate FedProx / Moon must equal FedAvg bitwise, round by round.
  const auto same_as_fedavg = [&](FederationConfig c, const std::string& what) {
    std::size_t r = 0;
    bool equal = true;
    run_federation(c, model, clients, test, [&](const RoundTrace& tr, const RoundState& st) {
      equal = equal && hot_vector(st.global) == fedavg_globals.at(r) && tr.mean_train_loss == fedavg_losses.at(r);
      ++r;
    });
    check(equal && r == rounds, what);
  };
  auto prox = small_federation(Algorithm::FedProx, rounds, 7);
  prox.params.mu = 0.0;
  same_as_fedavg(prox, "fedprox mu=0 differs from fedavg");
  auto moon = small_federation(Algorithm::Moon, rounds, 7);
  moon.params.contrastive_weight = 0.0;
  same_as_fedavg(moon, "moon weight=0 differs from fedavg");

  // FedMut: the variants average to the global. In floating point the
  // symmetric +/- pairs cancel up to the rounding of w + d and w - d, so the
  // check uses a bound of a few ulps of the largest magnitude involved, plus a
  // dyadic instance where every operation is exact and equality is bitwise.
  double fedmut_ulps = 0.0;
  std::size_t fedmut_rounds = 0;
  run_federation(small_federation(Algorithm::FedMut, rounds, 7), model, clients, test,
                 [&](const RoundTrace&, const RoundState& st) {
                   std::vector<WeightedVector> items;
                   for (const auto& v : st.variants) items.push_back({v, 1.0});
                   const auto mean = weighted_sum(items);
                   const auto g = hot_vector(st.global);
                   for (std::size_t i = 0; i < g.size(); ++i) {
                     double scale = std::abs(g[i]);
                     for (const auto& v : st.variants) scale = std::max(scale, std::abs(v[i]));
                     if (scale > 0)
                       fedmut_ulps = std::max(fedmut_ulps, std::abs(mean[i] - g[i]) /
                                                               (std::numeric_limits<double>::epsilon() * scale));
                   }
                   ++fedmut_rounds;
                 });
  check(fedmut_rounds == rounds && fedmut_ulps <= 8.0, "fedmut mean off by " + fmt("%.2f ulps", fedmut_ulps));
  bool dyadic = true;
  for (std::uint64_t seed = 0; seed < rounds; ++seed) {
    Rng rng(seed), vals(seed + 1000);
    std::uniform_int_distribution<int> q(-64, 64);
    FlatVector w(12), d(12);
    for (auto& x : w) x = q(vals) / 16.0;
    for (auto& x : d) x = q(vals) / 32.0;
    const auto variants = fedmut_mutate(w, d, 2 + seed % 5, 1.0, {3, 4, 5}, rng);
    std::vector<WeightedVector> items;
    for (const auto& v : variants) items.push_back({v, 1.0});
    dyadic = dyadic && weighted_sum(items) == w;
  }
  check(dyadic, "fedmut dyadic mean not bitwise");
  return check.outcome("fedavg idempotence " + fmt("%.1e", idem) + " <= 1e-12; prox mu=0 and moon weight=0 bitwise "
                       "equal to fedavg; fedmut mean within " + fmt("%.2f", fedmut_ulps) +
                       " ulps (bound 8) and bitwise on dyadic inputs; 20 rounds each");
}

// ---------------------------------------------------------------------------
// 3. PEFT init transparency

Outcome peft_transparency() {
  Checker check;
  double worst = 0.0;
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    const auto base = init(small_config(seed));
    const auto batch = toy_batch(50, 10, seed + 40);
    for (auto kind : {SchemeKind::Lora, SchemeKind::Loha, SchemeKind::Ia3, SchemeKind::PTuningV2}) {
      const auto p = attach(scheme_of(kind, seed), base);
      const double gap = max_logit_gap(base, p, batch);
      worst = std::max(worst, gap);
      check(gap <= 1e-12, to_string(kind) + " changes logits by " + fmt("%.3g", gap));
    }
  }

  // P-Tuning V1 on a hand-checked 2-token instance: with zeroed block weights
  // the representation is (sum of token embeddings + tanh(W p + b)) / (T + 1).
  ModelConfig mc = small_config(1, 4, 2, 1, 2);
  auto base = init(mc);
  const auto L = base.layout();
  base.at(L.embedding()).value.values = {0, 0, 0, 0, 1.0, 2.0, -3.0, 0.5};
  for (auto idx : {L.w1(0), L.w2(0)})
    std::fill(base.at(idx).value.values.begin(), base.at(idx).value.values.end(), 0.0);
  auto spec = scheme_of(SchemeKind::PTuningV1);
  spec.n_prompt = 1;
  auto p = attach(spec, base);
  p.at(L.prompt()).value.values = {0.5, -1.0};
  p.at(L.prompt_w()).value.values = {1.0, 0.0, 0.0, 2.0};
  p.at(L.prompt_b()).value.values = {0.1, 0.0};
  const Batch b{{{2, 3}}, {1}};
  const auto out = forward(p, b);
  const double want0 = (1.0 - 3.0 + std::tanh(0.6)) / 3.0, want1 = (2.0 + 0.5 + std::tanh(-2.0)) / 3.0;
  const double hand = std::max(std::abs(out.representation(0, 0) - want0), std::abs(out.representation(0, 1) - want1));
  check(hand <= 1e-14, "ptv1 pooled mean off by " + fmt("%.3g", hand));
  const auto plain = forward(base, b);
  check(plain.representation(0, 0) == -1.0 && plain.representation(0, 1) == 1.25, "unprompted pooled mean");
  return check.outcome("lora/loha/ia3/ptv2 max logit change " + fmt("%.1e", worst) +
                       " <= 1e-12; ptv1 hand-checked pooled mean error " + fmt("%.1e", hand));
}

// ---------------------------------------------------------------------------
// 4. Communication accounting

Outcome communication() {
  Checker check;
  std::string rates;
  for (const auto& mc : {small_config(1, 100, 16, 2, 32), small_config(2, 500, 32, 3, 64)}) {
    const auto base = init(mc);
    const std::size_t full_payload = sizeof(double) * base.total_count();
    for (auto kind : all_schemes()) {
      const auto p = attach(scheme_of(kind), base);
      const auto bytes = encode_update(RoundUpdate{0, hot_vector(p), 1, 0.0}).size();
      const double expected = hot_param_rate(p) * double(full_payload) + double(kUpdateHeaderBytes);
      check(std::abs(double(bytes) - expected) <= 1e-6 * expected, to_string(kind) + " update size");
      if (kind == SchemeKind::Full) check(hot_param_rate(p) == 1.0, "full rate is not exactly 1");
      if (mc.vocab_size == 100) rates += " " + to_string(kind) + " " + percent(hot_param_rate(p)) + "%";
    }
  }
  return check.outcome("size = rate x full + " + std::to_string(kUpdateHeaderBytes) + " B header;" + rates);
}

// ---------------------------------------------------------------------------
// 5. Partition statistics

Dataset labelled_counts(const std::vector<std::pair<std::string, std::size_t>>& counts) {
  Dataset ds;
  std::size_t id = 0;
  for (const auto& [cat, n] : counts)
    for (std::size_t i = 0; i < n; ++i) {
      DatasetSample s;
      s.sample_id = std::to_string(id++);
      s.token_text = {"x"};
      s.tokens = {2};
      s.label = cat == "secure" ? Label::Secure : Label::Vulnerable;
      if (cat != "secure") s.cwe = cat;
      ds.samples.push_back(std::move(s));
    }
  ds.recount();
  return ds;
}

Outcome partition_statistics() {
  Checker check;
  const auto ds = labelled_counts({{"secure", 1100}, {"CWE-20", 500}, {"CWE-787", 300}, {"CWE-125", 100}});
  const auto spec = [](PartitionMode mode, double alpha, std::uint64_t seed) {
    PartitionSpec p;
    p.n_clients = 10;
    p.mode = mode;
    p.alpha = alpha;
    p.seed = seed;
    return p;
  };
  const auto disjoint_cover = [&](const std::vector<ClientShard>& shards) {
    std::set<std::size_t> seen;
    bool ok = shards.size() == 10;
    for (const auto& s : shards) {
      ok = ok && s.size() > 0;
      for (auto i : s.sample_indices) ok = ok && seen.insert(i).second;
    }
    return ok && seen.size() == ds.size();
  };

  double worst_share = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto shards = partition(ds, spec(PartitionMode::Dirichlet, 1e6, seed));
    check(disjoint_cover(shards), "alpha=1e6 shards");
    for (const auto& s : shards)
      for (const auto& [cat, n] : ds.label_histogram) {
        const auto it = s.label_histogram.find(cat);
        const double share = it == s.label_histogram.end() ? 0.0 : double(it->second) / double(s.size());
        worst_share = std::max(worst_share, std::abs(share - double(n) / double(ds.size())));
      }
  }
  check(worst_share <= 0.02, "alpha=1e6 share deviation " + fmt("%.4f", worst_share));

  const double alphas[3] = {0.1, 0.5, 100};
  double chi[3] = {0, 0, 0};
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (int a = 0; a < 3; ++a) {
      const auto shards = partition(ds, spec(PartitionMode::Dirichlet, alphas[a], seed));
      check(disjoint_cover(shards), "alpha=" + fmt("%g", alphas[a]) + " shards");
      chi[a] += mean_chi_square(ds, shards) / 20.0;
    }
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    check(disjoint_cover(partition(ds, spec(PartitionMode::Iid, 0.5, seed))), "iid shards");
  check(chi[0] > chi[1] && chi[1] > chi[2], "chi-square not strictly decreasing");
  return check.outcome("alpha=1e6 max share deviation " + fmt("%.4f", worst_share) + " <= 0.02; mean chi-square " +
                       fmt("%.2f", chi[0]) + " > " + fmt("%.2f", chi[1]) + " > " + fmt("%.2f", chi[2]) +
                       " (alpha 0.1/0.5/100, 20 seeds); shards disjoint, covering, nonempty");
}

// ---------------------------------------------------------------------------
// 6. Metrics oracle and the reference improvement arithmetic

Outcome metrics_oracle() {
  Checker check;
  Rng rng(2024);
  const std::vector<std::string> cwes{"CWE-20", "CWE-787", "CWE-125", "CWE-189"};
  std::size_t exact = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 80;
    std::vector<int> pred(n), label(n);
    std::vector<std::string> cats(n);
    Confusion c;
    std::map<std::string, std::pair<std::size_t, std::size_t>> per;
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = int(rng() % 2);
      label[i] = int(rng() % 2);
      cats[i] = label[i] ? cwes[rng() % cwes.size()] : "secure";
      if (pred[i] && label[i]) ++c.tp;
      if (pred[i] && !label[i]) ++c.fp;
      if (!pred[i] && !label[i]) ++c.tn;
      if (!pred[i] && label[i]) ++c.fn;
      auto& [total, hit] = per[cats[i]];
      ++total;
      if (pred[i] == label[i]) ++hit;
    }
    const auto r = evaluate(pred, label, cats);
    const double p = c.tp + c.fp ? double(c.tp) / double(c.tp + c.fp) : 0.0;
    const double rc = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0.0;
    bool ok = r.confusion == c && r.accuracy == double(c.tp + c.tn) / double(n) && r.precision == p &&
              r.recall == rc && r.f1 == (p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0) &&
              r.per_category.size() == per.size();
    for (const auto& [k, v] : per) {
      const auto it = r.per_category.find(k);
      ok = ok && it != r.per_category.end() && it->second.n_samples == v.first && it->second.n_detected == v.second;
    }
    check(ok, "case " + std::to_string(trial));
    exact += ok;
  }

  EvaluationReport indep, fed;
  indep.per_category["CWE-189"] = {100, 0, 0.0970};
  indep.per_category["CWE-295"] = {100, 0, 0.0667};
  fed.per_category["CWE-189"] = {100, 0, 0.1152};
  fed.per_category["CWE-295"] = {100, 0, 0.7000};
  const auto table = compare(indep, fed);
  const auto text = comparison_text(table);
  std::map<std::string, double> gain;
  for (const auto& row : table.rows) gain[row.category] = row.improvement();
  check(std::abs(gain["CWE-189"] - 0.0182) <= 1e-12, "CWE-189 improvement " + fmt("%.6f", gain["CWE-189"]));
  check(std::abs(gain["CWE-295"] - 0.6333) <= 1e-12, "CWE-295 improvement " + fmt("%.6f", gain["CWE-295"]));
  for (const char* s : {"9.70%", "11.52%", "1.82%", "6.67%", "70.00%", "63.33%"})
    check(text.find(s) != std::string::npos, std::string("comparison text lacks ") + s);
  return check.outcome(std::to_string(exact) + "/1000 random cases exact; CWE-189 9.70%->11.52% = +" +
                       percent(gain["CWE-189"]) + "%, CWE-295 6.67%->70.00% = +" + percent(gain["CWE-295"]) + "%");
}

// ---------------------------------------------------------------------------
// 7-10. Desk-scale experiments on the synthetic corpus

struct Experiment {
  double federated_f1 = 0.0;
  double isolated_f1 = 0.0;
  std::vector<double> losses;
};

Experiment run_experiment(const ExperimentConfig& cfg, bool with_baseline) {
  std::ostringstream quiet;
  const auto data = prepare_data(cfg, quiet);
  const auto initial = initial_model(cfg, data.train.vocab.size());
  const auto result = run_federation(cfg.federation, initial, client_datasets(data), labeled(data.test));
  Experiment e;
  e.federated_f1 = result.report.f1;
  for (const auto& t : result.trace) e.losses.push_back(t.mean_train_loss);
  if (with_baseline) e.isolated_f1 = run_baselines(cfg, data).mean_f1;
  return e;
}

ExperimentConfig seeded(const ExperimentConfig& demo, std::uint64_t seed) {
  auto cfg = demo;
  apply_seed_override(cfg, seed);
  return cfg;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

struct DeskRuns {
  std::vector<Experiment> iid, dirichlet;
};

DeskRuns desk_runs(const ExperimentConfig& demo) {
  DeskRuns runs;
  for (auto seed : kSeeds) {
    auto cfg = seeded(demo, seed);
    cfg.partition.mode = PartitionMode::Iid;
    cfg.federation.algorithm = Algorithm::FedAvg;
    runs.iid.push_back(run_experiment(cfg, true));
    cfg.partition.mode = PartitionMode::Dirichlet;
    cfg.partition.alpha = 0.5;
    runs.dirichlet.push_back(run_experiment(cfg, true));
  }
  return runs;
}

Outcome federation_benefit(const ExperimentConfig& demo, const DeskRuns& runs, double secs) {
  Checker check;
  std::string detail;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    const auto& e = runs.iid[i];
    const double gap = e.federated_f1 - e.isolated_f1;
    check(gap >= 0.10, "seed " + std::to_string(kSeeds[i]) + " gap " + fmt("%.3f", gap));
    detail += " s" + std::to_string(kSeeds[i]) + " " + percent(e.federated_f1) + " vs " + percent(e.isolated_f1);
  }
  return check.outcome("IID FedAvg " + std::to_string(demo.federation.rounds) + " rounds, " +
                       std::to_string(demo.partition.n_clients) + " clients, federated vs mean isolated F1 (%):" +
                       detail + "; required +10.00 on every seed; 10 experiments " + fmt("%.0f s", secs));
}

Outcome non_iid_direction(const DeskRuns& runs) {
  Checker check;
  std::string detail;
  double mean_gap = 0.0;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    const auto& d = runs.dirichlet[i];
    const double iid_gap = runs.iid[i].federated_f1 - d.federated_f1;
    mean_gap += iid_gap / double(kSeeds.size());
    check(d.federated_f1 > d.isolated_f1, "seed " + std::to_string(kSeeds[i]) + " federated " +
                                              percent(d.federated_f1) + " <= isolated " + percent(d.isolated_f1));
    detail += " s" + std::to_string(kSeeds[i]) + " " + percent(d.federated_f1) + " (iso " + percent(d.isolated_f1) +
              ", iid " + percent(runs.iid[i].federated_f1) + ")";
  }
  check(mean_gap > 0.0, "dirichlet federated F1 does not trail iid on average");
  return check.outcome("Dirichlet alpha=0.5 federated F1 (%):" + detail + "; mean gap to IID " + percent(mean_gap) +
                       " points");
}

Outcome algorithm_sweep(const ExperimentConfig& demo) {
  Checker check;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t runs = 0, monotone = 0, errors = 0;
  std::map<std::string, std::size_t> per_algo;
  const auto start = std::chrono::steady_clock::now();
  for (auto algo : {Algorithm::FedAvg, Algorithm::FedProx, Algorithm::CluSamp, Algorithm::FedCross, Algorithm::Moon,
                    Algorithm::FedMut})
    for (auto kind : {SchemeKind::Full, SchemeKind::Lora, SchemeKind::Ia3})
      for (auto seed : seeds) {
        auto cfg = seeded(demo, seed);
        cfg.federation.algorithm = algo;
        cfg.federation.rounds = 10;
        cfg.scheme.kind = kind;
        ++runs;
        try {
          const auto e = run_experiment(cfg, false);
          check(e.losses.size() == 10, "trace length");
          bool mono = true;
          for (std::size_t r = 1; r < 5; ++r) mono = mono && e.losses[r] <= e.losses[r - 1];
          if (mono) {
            ++monotone;
            ++per_algo[to_string(algo)];
          }
        } catch (const std::exception& ex) {
          ++errors;
          check(false, to_string(algo) + "/" + to_string(kind) + ": " + ex.what());
        }
      }
  const double rate = double(monotone) / double(runs);
  check(rate >= 0.8, "monotone rate " + percent(rate) + "%");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::string detail;
  for (const auto& [a, n] : per_algo) detail += " " + a + " " + std::to_string(n) + "/9";
  return check.outcome(std::to_string(runs) + " runs (6 algorithms x full/lora/ia3 x 3 seeds, 10 rounds), " +
                       std::to_string(errors) + " errors, monotone first-5-round loss in " + std::to_string(monotone) +
                       "/" + std::to_string(runs) + " = " + percent(rate) + "% >= 80%;" + detail + "; " +
                       fmt("%.0f s", secs));
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) {
      const auto bytes = read_bytes(entry.path());
      files[fs::relative(entry.path(), dir).generic_string()] = std::string(bytes.begin(), bytes.end());
    }
  return files;
}

Outcome determinism(const ExperimentConfig& demo) {
  Checker check;
  const fs::path root = fs::temp_directory_path() / "fedvuln_acceptance_determinism";
  fs::remove_all(root);
  std::size_t compared = 0;
  for (auto algo : {Algorithm::FedAvg, Algorithm::Moon, Algorithm::FedMut}) {
    auto cfg = seeded(demo, 9);
    cfg.federation.algorithm = algo;
    cfg.federation.rounds = 6;
    cfg.checkpoint_every = 3;
    cfg.scheme.kind = algo == Algorithm::FedMut ? SchemeKind::Lora : SchemeKind::Full;
    cfg.partition.mode = PartitionMode::Dirichlet;
    cfg.output_dir = root / to_string(algo);
    std::vector<std::map<std::string, std::string>> outputs;
    for (int rerun = 0; rerun < 2; ++rerun) {
      fs::remove_all(cfg.output_dir);
      std::ostringstream log;
      cmd_prepare(cfg, log);
      cmd_run(cfg, log);
      cmd_baseline(cfg, log);
      cmd_compare(cfg.output_dir / "run", cfg.output_dir / "baseline", cfg.output_dir / "compare", log);
      outputs.push_back(snapshot(cfg.output_dir));
    }
    check(outputs[0].count("run/trace.jsonl") && outputs[0].count("run/report.json"), "outputs missing");
    check(outputs[0].size() == outputs[1].size(), "different file sets");
    for (const auto& [name, bytes] : outputs[0]) {
      const auto it = outputs[1].find(name);
      check(it != outputs[1].end() && it->second == bytes, to_string(algo) + " " + name + " differs");
      ++compared;
    }
  }
  fs::remove_all(root);
  return check.outcome("fedavg/full, moon/full, fedmut/lora: prepare+run+baseline+compare twice, " +
                       std::to_string(compared) + " files byte-identical (traces, reports, checkpoints)");
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path demo_path = argc > 1 ? fs::path(argv[1]) : fs::path(FEDVULN_DEMO_CONFIG);
  ExperimentConfig demo;
  try {
    demo = load_config(demo_path);
  } catch (const std::exception& e) {
    std::cerr << "acceptance: cannot load " << demo_path << ": " << e.what() << '\n';
    return 2;
  }

  bool all = true;
  const auto report = [&](int id, const std::string& name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
  };

  report(1, "gradient suite", gradient_suite);
  report(2, "aggregation identities", aggregation_identities);
  report(3, "PEFT init transparency", peft_transparency);
  report(4, "communication accounting", communication);
  report(5, "partition statistics", partition_statistics);
  report(6, "metrics oracle", metrics_oracle);

  DeskRuns runs;
  double desk_secs = 0.0;
  std::string desk_error;
  try {
    const auto start = std::chrono::steady_clock::now();
    runs = desk_runs(demo);
    desk_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  const auto desk = [&](const std::function<Outcome()>& body) {
    return [&, body]() { return desk_error.empty() ? body() : Outcome{false, "error: " + desk_error}; };
  };
  report(7, "federation beats isolation (IID)", desk([&] { return federation_benefit(demo, runs, desk_secs); }));
  report(8, "non-IID direction (Dirichlet 0.5)", desk([&] { return non_iid_direction(runs); }));
  report(9, "algorithm sweep", [&] { return algorithm_sweep(demo); });
  report(10, "determinism", [&] { return determinism(demo); });

  std::cout << (all ? "ALL PASS" : "SOME CRITERIA FAILED") << std::endl;
  return all ? 0 : 1;
}
