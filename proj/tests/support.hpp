#pragma once

// Shared fixtures for the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <random>

#include "fedvuln/fedcore.hpp"
#include "fedvuln/peft.hpp"
#include "fedvuln/refmodel.hpp"

namespace fedvuln::testing {

inline ModelConfig small_config(std::uint64_t seed = 3, std::size_t vocab = 50, std::size_t embed = 8,
                                std::size_t blocks = 2, std::size_t hidden = 12) {
  ModelConfig mc;
  mc.vocab_size = vocab;
  mc.embed_dim = embed;
  mc.n_blocks = blocks;
  mc.hidden_dim = hidden;
  mc.max_len = 16;
  mc.seed = seed;
  return mc;
}

inline SchemeSpec scheme_of(SchemeKind kind, std::uint64_t seed = 5) {
  SchemeSpec s;
  s.kind = kind;
  s.seed = seed;
  return s;
}

inline const std::vector<SchemeKind>& all_schemes() {
  static const std::vector<SchemeKind> kinds{SchemeKind::Full, SchemeKind::PTuningV1, SchemeKind::PTuningV2,
                                             SchemeKind::Lora, SchemeKind::Loha,      SchemeKind::Ia3};
  return kinds;
}

/// Moves every hot entry by a seeded uniform amount, so adapters leave their
/// transparent initialization.
inline void perturb_hot(ParamSet& p, std::uint64_t seed, double amount = 0.3) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-amount, amount);
  FlatVector h = hot_vector(p);
  for (auto& v : h) v += u(rng);
  set_hot_vector(p, h);
}

/// n sequences of varying length over ids [2, vocab), alternating labels.
inline Batch toy_batch(std::size_t vocab, std::size_t n = 6, std::uint64_t seed = 11) {
  Rng rng(seed);
  std::uniform_int_distribution<TokenId> tok(2, static_cast<TokenId>(vocab) - 1);
  Batch b;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<TokenId> t(3 + i % 5);
    for (auto& x : t) x = tok(rng);
    b.tokens.push_back(std::move(t));
    b.labels.push_back(static_cast<int>(i % 2));
  }
  return b;
}

/// Relative error used by the gradient checks: |fd - an| / max(|fd|, |an|, 1e-6).
inline double relative_error(double fd, double an) {
  return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
}

/// Worst relative error between analytic hot gradients and central finite
/// differences (eps = 1e-5) of the full objective, hooks included.
inline double worst_gradient_error(const ParamSet& p, const Batch& b, const HookList& hooks = {}) {
  const FlatVector an = hot_vector(loss_and_grad(p, b, hooks).grads);
  const FlatVector h = hot_vector(p);
  const double eps = 1e-5;
  double worst = 0.0;
  ParamSet q = p;
  for (std::size_t i = 0; i < h.size(); ++i) {
    FlatVector hp = h, hm = h;
    hp[i] += eps;
    hm[i] -= eps;
    set_hot_vector(q, hp);
    const double lp = loss_and_grad_reference(q, b, hooks).loss;
    set_hot_vector(q, hm);
    const double lm = loss_and_grad_reference(q, b, hooks).loss;
    worst = std::max(worst, relative_error((lp - lm) / (2 * eps), an[i]));
  }
  return worst;
}

/// One LabeledData built straight from a Batch.
inline LabeledData labeled_from(const Batch& b, const std::vector<std::string>& categories = {}) {
  LabeledData d;
  d.tokens = b.tokens;
  d.labels = b.labels;
  d.categories = categories;
  if (d.categories.empty())
    for (int y : b.labels) d.categories.push_back(y ? "CWE-20" : "secure");
  return d;
}

}  // namespace fedvuln::testing
