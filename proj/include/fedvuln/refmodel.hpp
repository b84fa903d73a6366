#pragma once

// Compact reference classifier: mean-pooled token embeddings, residual
// feed-forward blocks, linear classification head.
//
//   x0     = (sum_t E[t] + sum_k prompt_k) / (T + n_prompt)
//   u_l    = x_{l-1} + prefix_l                      (ptv2 only)
//   x_l    = u_l + W2_l (scale_l * relu(W1_l u_l + b1_l)) + b2_l
//   z      = x_L                                     (representation)
//   logits = Wh z + bh
//
// scale_l is the ia3 vector (ones otherwise); W1/W2 include the lora/loha
// update when one is attached.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "fedvuln/corpus.hpp"
#include "fedvuln/params.hpp"

namespace fedvuln {

struct Batch {
  std::vector<std::vector<TokenId>> tokens;  // PAD entries are ignored
  std::vector<int> labels;

  std::size_t size() const { return tokens.size(); }
};

struct ForwardResult {
  Matrix logits;          // batch x n_classes
  Matrix representation;  // batch x embed_dim
};

/// Extra loss term added to the mean cross-entropy.
class LossHook {
 public:
  virtual ~LossHook() = default;
  /// Term depending on the flattened hot parameters; adds its gradient to hot_grad.
  virtual double parameter_term(std::span<const double> hot, std::span<double> hot_grad) const;
  /// Term depending on per-sample representations; adds d(term)/d(rep) to rep_grad.
  virtual double representation_term(const Batch& batch, const Matrix& reps, Matrix& rep_grad) const;
};

using HookList = std::vector<std::shared_ptr<const LossHook>>;

struct LossAndGrad {
  double loss = 0.0;       // cross-entropy plus every hook term
  double data_loss = 0.0;  // mean cross-entropy alone
  ParamSet grads;  // cold segments are zero
};

ParamSet init(const ModelConfig& config);

void validate_batch(const ParamSet& params, const Batch& batch);

ForwardResult forward(const ParamSet& params, const Batch& batch);

/// Chunk-parallel kernel used for training; deterministic for any thread count.
LossAndGrad loss_and_grad(const ParamSet& params, const Batch& batch, const HookList& hooks = {});

/// Single-threaded sample-by-sample reference of loss_and_grad.
LossAndGrad loss_and_grad_reference(const ParamSet& params, const Batch& batch, const HookList& hooks = {});

/// Argmax of logits; ties go to the lower class index.
std::vector<int> predict(const ParamSet& params, const Batch& batch);
std::vector<int> argmax_rows(const Matrix& logits);

/// params.hot -= lr * grads.hot
void gradient_step(ParamSet& params, const ParamSet& grads, double learning_rate);

}  // namespace fedvuln
