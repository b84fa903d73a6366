#pragma once

// Per-sample forward/backward pieces shared by the serial reference and the
// OpenMP kernel.

#include <span>
#include <vector>

#include "fedvuln/refmodel.hpp"

namespace fedvuln::detail {

struct Workspace {
  const ParamSet* params = nullptr;
  Layout layout;
  std::size_t d = 0, h = 0, classes = 0, blocks = 0;
  SchemeKind kind = SchemeKind::Full;
  std::vector<Matrix> w1, w2;  // effective weights
  Matrix prompt_pre;           // ptv1: reparam W * prompt_k + b, one row per prompt
  FlatVector prompt_sum;       // ptv1: sum_k tanh(prompt_pre_k)
  std::size_t n_prompt = 0;
  bool embed_grad = false;
  bool weight_grad = false;    // gradients w.r.t. effective W1/W2 are needed

  explicit Workspace(const ParamSet& p);
  std::span<const double> b1(std::size_t l) const { return params->at(layout.b1(l)).value.values; }
  std::span<const double> b2(std::size_t l) const { return params->at(layout.b2(l)).value.values; }
};

struct SampleCache {
  std::vector<TokenId> ids;  // non-PAD tokens
  double denom = 1.0;        // ids.size() + n_prompt
  std::vector<FlatVector> u, a, s;  // per block: block input, pre-activation, scaled activation
  FlatVector z;
  FlatVector logits;
  FlatVector log_probs;
};

struct Accum {
  Matrix dE;
  std::vector<Matrix> dW1, dW2;
  std::vector<FlatVector> db1, db2, dprefix, dscale;
  Matrix dWh;
  FlatVector dbh;
  FlatVector dprompt;  // gradient w.r.t. every tanh(prompt_pre_k); identical for all k

  /// Without `with_embedding` the embedding gradient is left to the caller
  /// (see scatter_embedding_grad); dE stays empty.
  explicit Accum(const Workspace& ws, bool with_embedding = true);
  void add(const Accum& other);
};

void sample_forward(const Workspace& ws, std::span<const TokenId> tokens, SampleCache& cache);
/// Returns the gradient w.r.t. the pooled input (already divided by the
/// pooling denominator); it is scattered into acc.dE when acc holds one.
FlatVector sample_backward(const Workspace& ws, const SampleCache& cache, std::span<const double> dlogits,
                           std::span<const double> dz_extra, Accum& acc);
/// Adds the pooled-input gradient to every embedding row the sample used.
void scatter_embedding_grad(const SampleCache& cache, std::span<const double> dpooled, Matrix& dE);

/// Runs representation hooks; returns their loss and fills rep_grad (batch x embed).
double run_representation_hooks(const HookList& hooks, const Batch& batch,
                                 const std::vector<SampleCache>& caches, Matrix& rep_grad);

/// dlogits for sample i: (softmax - onehot) / batch
FlatVector logit_grad(const SampleCache& cache, int label, std::size_t batch);

LossAndGrad finalize(const Workspace& ws, const Accum& acc, double loss, double data_loss, const HookList& hooks);

}  // namespace fedvuln::detail
