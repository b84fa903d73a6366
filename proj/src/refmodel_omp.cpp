#include <algorithm>

#include <omp.h>

#include "fedvuln/errors.hpp"
#include "fedvuln/refmodel.hpp"
#include "model_kernel.hpp"

namespace fedvuln {

namespace {
// Fixed chunking keeps the reduction order independent of the thread count.
constexpr std::size_t kChunk = 16;
}  // namespace

ForwardResult forward(const ParamSet& params, const Batch& batch) {
  validate_batch(params, batch);
  const detail::Workspace ws(params);
  const std::size_t n = batch.size();
  ForwardResult out{Matrix(n, params.config.n_classes), Matrix(n, params.config.embed_dim)};

#pragma omp parallel
  {
    detail::SampleCache cache;
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      detail::sample_forward(ws, batch.tokens[i], cache);
      std::copy(cache.logits.begin(), cache.logits.end(), out.logits.row(i).begin());
      std::copy(cache.z.begin(), cache.z.end(), out.representation.row(i).begin());
    }
  }
  return out;
}

LossAndGrad loss_and_grad(const ParamSet& params, const Batch& batch, const HookList& hooks) {
  if (batch.size() == 0) fail(ErrorKind::Input, "loss_and_grad on an empty batch");
  if (batch.labels.size() != batch.size()) fail(ErrorKind::Input, "loss_and_grad needs one label per sequence");
  validate_batch(params, batch);
  const detail::Workspace ws(params);
  const std::size_t n = batch.size();
  std::vector<detail::SampleCache> caches(n);

#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) detail::sample_forward(ws, batch.tokens[i], caches[i]);

  double ce = 0.0;
  for (std::size_t i = 0; i < n; ++i) ce -= caches[i].log_probs[static_cast<std::size_t>(batch.labels[i])];
  const double data_loss = ce / static_cast<double>(n);
  double loss = data_loss;

  Matrix rep_grad;
  loss += detail::run_representation_hooks(hooks, batch, caches, rep_grad);

  // Chunks accumulate the dense gradients; the embedding gradient would need a
  // vocab-sized buffer per chunk, so the per-sample pooled gradients are kept
  // and scattered afterwards in sample order.
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<detail::Accum> partial;
  partial.reserve(n_chunks);
  for (std::size_t c = 0; c < n_chunks; ++c) partial.emplace_back(ws, false);
  std::vector<FlatVector> dpooled(n);

#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < n_chunks; ++c) {
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const auto dl = detail::logit_grad(caches[i], batch.labels[i], n);
      std::span<const double> dz;
      if (rep_grad.rows) dz = rep_grad.row(i);
      dpooled[i] = detail::sample_backward(ws, caches[i], dl, dz, partial[c]);
    }
  }
  for (std::size_t c = 1; c < n_chunks; ++c) partial[0].add(partial[c]);
  if (ws.embed_grad) {
    partial[0].dE = Matrix(params.config.vocab_size, ws.d);
    for (std::size_t i = 0; i < n; ++i) detail::scatter_embedding_grad(caches[i], dpooled[i], partial[0].dE);
  }
  return detail::finalize(ws, partial[0], loss, data_loss, hooks);
}

}  // namespace fedvuln
