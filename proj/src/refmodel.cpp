#include "fedvuln/refmodel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fedvuln/errors.hpp"
#include "fedvuln/peft.hpp"
#include "model_kernel.hpp"

namespace fedvuln {

double LossHook::parameter_term(std::span<const double>, std::span<double>) const { return 0.0; }
double LossHook::representation_term(const Batch&, const Matrix&, Matrix&) const { return 0.0; }

ParamSet init(const ModelConfig& config) {
  config.validate();
  ParamSet p;
  p.config = config;
  Rng rng(config.seed);
  auto uniform = [&rng](std::size_t rows, std::size_t cols, double bound) {
    Matrix m(rows, cols);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : m.values) v = dist(rng);
    return m;
  };
  const auto d = config.embed_dim, h = config.hidden_dim;
  // Every matrix uses its column count as fan-in, the embedding table included.
  p.segments.push_back({"embedding", uniform(config.vocab_size, d, 1.0 / std::sqrt(double(d))), true});
  for (std::size_t l = 0; l < config.n_blocks; ++l) {
    const std::string prefix = "block" + std::to_string(l);
    p.segments.push_back({prefix + ".W1", uniform(h, d, 1.0 / std::sqrt(double(d))), true});
    p.segments.push_back({prefix + ".b1", Matrix(h, 1), true});
    p.segments.push_back({prefix + ".W2", uniform(d, h, 1.0 / std::sqrt(double(h))), true});
    p.segments.push_back({prefix + ".b2", Matrix(d, 1), true});
  }
  p.segments.push_back({"head.W", uniform(config.n_classes, d, 1.0 / std::sqrt(double(d))), true});
  p.segments.push_back({"head.b", Matrix(config.n_classes, 1), true});
  return p;
}

void validate_batch(const ParamSet& params, const Batch& batch) {
  if (!batch.labels.empty() && batch.labels.size() != batch.tokens.size())
    fail(ErrorKind::Input, "batch has " + std::to_string(batch.tokens.size()) + " sequences but " +
                               std::to_string(batch.labels.size()) + " labels");
  const auto vocab = static_cast<TokenId>(params.config.vocab_size);
  for (std::size_t i = 0; i < batch.tokens.size(); ++i) {
    bool any = false;
    for (auto t : batch.tokens[i]) {
      if (t < 0 || t >= vocab)
        fail(ErrorKind::Input, "token id " + std::to_string(t) + " out of range for vocabulary of " +
                                   std::to_string(vocab));
      any = any || t != Vocab::kPad;
    }
    if (!any) fail(ErrorKind::Input, "sequence " + std::to_string(i) + " has no non-PAD tokens");
  }
  for (auto y : batch.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= params.config.n_classes)
      fail(ErrorKind::Input, "label " + std::to_string(y) + " out of range");
}

namespace detail {

Workspace::Workspace(const ParamSet& p)
    : params(&p),
      layout(p.layout()),
      d(p.config.embed_dim),
      h(p.config.hidden_dim),
      classes(p.config.n_classes),
      blocks(p.config.n_blocks),
      kind(p.scheme.kind) {
  const bool low_rank = kind == SchemeKind::Lora || kind == SchemeKind::Loha;
  for (std::size_t l = 0; l < blocks; ++l) {
    w1.push_back(p.at(layout.w1(l)).value);
    w2.push_back(p.at(layout.w2(l)).value);
    if (low_rank) {
      const Matrix d1 = adapter_delta(p, l, 0), d2 = adapter_delta(p, l, 1);
      for (std::size_t i = 0; i < d1.values.size(); ++i) w1[l].values[i] += d1.values[i];
      for (std::size_t i = 0; i < d2.values.size(); ++i) w2[l].values[i] += d2.values[i];
    }
  }
  prompt_sum.assign(d, 0.0);
  if (kind == SchemeKind::PTuningV1) {
    const auto& prompt = p.at(layout.prompt()).value;
    const auto& rw = p.at(layout.prompt_w()).value;
    const auto& rb = p.at(layout.prompt_b()).value.values;
    n_prompt = prompt.rows;
    prompt_pre = Matrix(n_prompt, d);
    for (std::size_t k = 0; k < n_prompt; ++k) {
      auto pre = prompt_pre.row(k);
      matvec(rw, prompt.row(k), pre);
      for (std::size_t j = 0; j < d; ++j) {
        pre[j] += rb[j];
        prompt_sum[j] += std::tanh(pre[j]);
      }
    }
  }
  embed_grad = p.at(layout.embedding()).hot;
  weight_grad = low_rank || p.at(layout.w1(0)).hot;
}

Accum::Accum(const Workspace& ws, bool with_embedding) {
  if (ws.embed_grad && with_embedding) dE = Matrix(ws.params->config.vocab_size, ws.d);
  if (ws.weight_grad) {
    dW1.assign(ws.blocks, Matrix(ws.h, ws.d));
    dW2.assign(ws.blocks, Matrix(ws.d, ws.h));
  }
  db1.assign(ws.blocks, FlatVector(ws.h, 0.0));
  db2.assign(ws.blocks, FlatVector(ws.d, 0.0));
  if (ws.kind == SchemeKind::PTuningV2) dprefix.assign(ws.blocks, FlatVector(ws.d, 0.0));
  if (ws.kind == SchemeKind::Ia3) dscale.assign(ws.blocks, FlatVector(ws.h, 0.0));
  dWh = Matrix(ws.classes, ws.d);
  dbh.assign(ws.classes, 0.0);
  if (ws.kind == SchemeKind::PTuningV1) dprompt.assign(ws.d, 0.0);
}

namespace {
void add_into(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}
}  // namespace

void Accum::add(const Accum& o) {
  add_into(dE.values, o.dE.values);
  for (std::size_t l = 0; l < dW1.size(); ++l) {
    add_into(dW1[l].values, o.dW1[l].values);
    add_into(dW2[l].values, o.dW2[l].values);
  }
  for (std::size_t l = 0; l < db1.size(); ++l) {
    add_into(db1[l], o.db1[l]);
    add_into(db2[l], o.db2[l]);
  }
  for (std::size_t l = 0; l < dprefix.size(); ++l) add_into(dprefix[l], o.dprefix[l]);
  for (std::size_t l = 0; l < dscale.size(); ++l) add_into(dscale[l], o.dscale[l]);
  add_into(dWh.values, o.dWh.values);
  add_into(dbh, o.dbh);
  add_into(dprompt, o.dprompt);
}

void sample_forward(const Workspace& ws, std::span<const TokenId> tokens, SampleCache& c) {
  const ParamSet& p = *ws.params;
  const auto& emb = p.at(ws.layout.embedding()).value;
  c.ids.clear();
  for (auto t : tokens)
    if (t != Vocab::kPad) c.ids.push_back(t);
  if (c.ids.empty()) fail(ErrorKind::Input, "sequence has no non-PAD tokens");

  FlatVector x = ws.prompt_sum;
  for (auto t : c.ids) {
    const auto row = emb.row(static_cast<std::size_t>(t));
    for (std::size_t j = 0; j < ws.d; ++j) x[j] += row[j];
  }
  c.denom = static_cast<double>(c.ids.size() + ws.n_prompt);
  for (auto& v : x) v /= c.denom;

  c.u.resize(ws.blocks);
  c.a.resize(ws.blocks);
  c.s.resize(ws.blocks);
  for (std::size_t l = 0; l < ws.blocks; ++l) {
    auto& u = c.u[l];
    u = x;
    if (ws.kind == SchemeKind::PTuningV2) {
      const auto& q = p.at(ws.layout.prefix(l)).value.values;
      for (std::size_t j = 0; j < ws.d; ++j) u[j] += q[j];
    }
    auto& a = c.a[l];
    a.assign(ws.h, 0.0);
    matvec(ws.w1[l], u, a);
    const auto b1 = ws.b1(l);
    auto& s = c.s[l];
    s.assign(ws.h, 0.0);
    for (std::size_t j = 0; j < ws.h; ++j) {
      a[j] += b1[j];
      s[j] = a[j] > 0.0 ? a[j] : 0.0;
    }
    if (ws.kind == SchemeKind::Ia3) {
      const auto& scale = p.at(ws.layout.ia3_scale(l)).value.values;
      for (std::size_t j = 0; j < ws.h; ++j) s[j] *= scale[j];
    }
    FlatVector out(ws.d, 0.0);
    matvec(ws.w2[l], s, out);
    const auto b2 = ws.b2(l);
    for (std::size_t j = 0; j < ws.d; ++j) x[j] = u[j] + out[j] + b2[j];
  }
  c.z = x;

  FlatVector logits(ws.classes, 0.0);
  matvec(p.at(ws.layout.head_w()).value, c.z, logits);
  const auto& bh = p.at(ws.layout.head_b()).value.values;
  for (std::size_t k = 0; k < ws.classes; ++k) logits[k] += bh[k];
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  c.log_probs.resize(ws.classes);
  for (std::size_t k = 0; k < ws.classes; ++k) sum += std::exp(logits[k] - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t k = 0; k < ws.classes; ++k) c.log_probs[k] = logits[k] - lse;
  c.logits = std::move(logits);
}

FlatVector logit_grad(const SampleCache& c, int label, std::size_t batch) {
  FlatVector g(c.log_probs.size());
  const double inv = 1.0 / static_cast<double>(batch);
  for (std::size_t k = 0; k < g.size(); ++k)
    g[k] = (std::exp(c.log_probs[k]) - (static_cast<int>(k) == label ? 1.0 : 0.0)) * inv;
  return g;
}

FlatVector sample_backward(const Workspace& ws, const SampleCache& c, std::span<const double> dlogits,
                     std::span<const double> dz_extra, Accum& acc) {
  const ParamSet& p = *ws.params;
  outer_acc(1.0, dlogits, c.z, acc.dWh);
  for (std::size_t k = 0; k < ws.classes; ++k) acc.dbh[k] += dlogits[k];

  FlatVector dx(ws.d, 0.0);
  matvec_transposed_acc(p.at(ws.layout.head_w()).value, dlogits, dx);
  if (!dz_extra.empty())
    for (std::size_t j = 0; j < ws.d; ++j) dx[j] += dz_extra[j];

  FlatVector ds(ws.h), da(ws.h);
  for (std::size_t l = ws.blocks; l-- > 0;) {
    for (std::size_t j = 0; j < ws.d; ++j) acc.db2[l][j] += dx[j];
    if (ws.weight_grad) outer_acc(1.0, dx, c.s[l], acc.dW2[l]);
    std::fill(ds.begin(), ds.end(), 0.0);
    matvec_transposed_acc(ws.w2[l], dx, ds);

    const auto& a = c.a[l];
    if (ws.kind == SchemeKind::Ia3) {
      const auto& scale = p.at(ws.layout.ia3_scale(l)).value.values;
      for (std::size_t j = 0; j < ws.h; ++j) {
        const double relu = a[j] > 0.0 ? a[j] : 0.0;
        acc.dscale[l][j] += ds[j] * relu;
        da[j] = a[j] > 0.0 ? ds[j] * scale[j] : 0.0;
      }
    } else {
      for (std::size_t j = 0; j < ws.h; ++j) da[j] = a[j] > 0.0 ? ds[j] : 0.0;
    }
    for (std::size_t j = 0; j < ws.h; ++j) acc.db1[l][j] += da[j];
    if (ws.weight_grad) outer_acc(1.0, da, c.u[l], acc.dW1[l]);
    // residual path plus the W1 path
    matvec_transposed_acc(ws.w1[l], da, dx);
    if (ws.kind == SchemeKind::PTuningV2)
      for (std::size_t j = 0; j < ws.d; ++j) acc.dprefix[l][j] += dx[j];
  }

  const double inv = 1.0 / c.denom;
  for (auto& v : dx) v *= inv;
  if (!acc.dE.values.empty()) scatter_embedding_grad(c, dx, acc.dE);
  if (ws.kind == SchemeKind::PTuningV1)
    for (std::size_t j = 0; j < ws.d; ++j) acc.dprompt[j] += dx[j];
  return dx;
}

void scatter_embedding_grad(const SampleCache& c, std::span<const double> dpooled, Matrix& dE) {
  for (auto t : c.ids) {
    auto row = dE.row(static_cast<std::size_t>(t));
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += dpooled[j];
  }
}

double run_representation_hooks(const HookList& hooks, const Batch& batch, const std::vector<SampleCache>& caches,
                                Matrix& rep_grad) {
  if (hooks.empty()) return 0.0;
  const std::size_t d = caches.empty() ? 0 : caches.front().z.size();
  Matrix reps(caches.size(), d);
  for (std::size_t i = 0; i < caches.size(); ++i) std::copy(caches[i].z.begin(), caches[i].z.end(), reps.row(i).begin());
  rep_grad = Matrix(caches.size(), d);
  double loss = 0.0;
  for (const auto& hook : hooks) loss += hook->representation_term(batch, reps, rep_grad);
  return loss;
}

LossAndGrad finalize(const Workspace& ws, const Accum& acc, double loss, double data_loss, const HookList& hooks) {
  const ParamSet& p = *ws.params;
  const Layout& L = ws.layout;
  LossAndGrad out{loss, data_loss, p.zeros_like()};
  ParamSet& g = out.grads;

  if (ws.embed_grad) g.at(L.embedding()).value = acc.dE;
  for (std::size_t l = 0; l < ws.blocks; ++l) {
    if (ws.weight_grad) {
      g.at(L.w1(l)).value.values = acc.dW1[l].values;
      g.at(L.w2(l)).value.values = acc.dW2[l].values;
    }
    g.at(L.b1(l)).value.values = acc.db1[l];
    g.at(L.b2(l)).value.values = acc.db2[l];
  }
  g.at(L.head_w()).value = acc.dWh;
  g.at(L.head_b()).value.values = acc.dbh;

  const double scale = p.scheme.alpha_scale / static_cast<double>(p.scheme.rank);
  switch (ws.kind) {
    case SchemeKind::Full:
      break;
    case SchemeKind::PTuningV1: {
      const auto& prompt = p.at(L.prompt()).value;
      const auto& rw = p.at(L.prompt_w()).value;
      auto& g_prompt = g.at(L.prompt()).value;
      auto& g_rw = g.at(L.prompt_w()).value;
      auto& g_rb = g.at(L.prompt_b()).value.values;
      FlatVector dpre(ws.d);
      for (std::size_t k = 0; k < ws.n_prompt; ++k) {
        const auto pre = ws.prompt_pre.row(k);
        for (std::size_t j = 0; j < ws.d; ++j) {
          const double t = std::tanh(pre[j]);
          dpre[j] = acc.dprompt[j] * (1.0 - t * t);
          g_rb[j] += dpre[j];
        }
        outer_acc(1.0, dpre, prompt.row(k), g_rw);
        matvec_transposed_acc(rw, dpre, g_prompt.row(k));
      }
      break;
    }
    case SchemeKind::PTuningV2:
      for (std::size_t l = 0; l < ws.blocks; ++l) g.at(L.prefix(l)).value.values = acc.dprefix[l];
      break;
    case SchemeKind::Lora:
      for (std::size_t l = 0; l < ws.blocks; ++l)
        for (int w = 0; w < 2; ++w) {
          const Matrix& dW = w == 0 ? acc.dW1[l] : acc.dW2[l];
          const auto& A = p.at(L.lora_a(l, w)).value;
          const auto& B = p.at(L.lora_b(l, w)).value;
          Matrix dA = matmul_bt(dW, B);
          Matrix dB = matmul_at(A, dW);
          for (auto& v : dA.values) v *= scale;
          for (auto& v : dB.values) v *= scale;
          g.at(L.lora_a(l, w)).value = std::move(dA);
          g.at(L.lora_b(l, w)).value = std::move(dB);
        }
      break;
    case SchemeKind::Loha:
      for (std::size_t l = 0; l < ws.blocks; ++l)
        for (int w = 0; w < 2; ++w) {
          const Matrix& dW = w == 0 ? acc.dW1[l] : acc.dW2[l];
          const auto& A1 = p.at(L.loha(l, w, 0)).value;
          const auto& B1 = p.at(L.loha(l, w, 1)).value;
          const auto& A2 = p.at(L.loha(l, w, 2)).value;
          const auto& B2 = p.at(L.loha(l, w, 3)).value;
          const Matrix m1 = matmul(A1, B1), m2 = matmul(A2, B2);
          Matrix dm1(dW.rows, dW.cols), dm2(dW.rows, dW.cols);
          for (std::size_t i = 0; i < dW.values.size(); ++i) {
            dm1.values[i] = scale * dW.values[i] * m2.values[i];
            dm2.values[i] = scale * dW.values[i] * m1.values[i];
          }
          g.at(L.loha(l, w, 0)).value = matmul_bt(dm1, B1);
          g.at(L.loha(l, w, 1)).value = matmul_at(A1, dm1);
          g.at(L.loha(l, w, 2)).value = matmul_bt(dm2, B2);
          g.at(L.loha(l, w, 3)).value = matmul_at(A2, dm2);
        }
      break;
    case SchemeKind::Ia3:
      for (std::size_t l = 0; l < ws.blocks; ++l) g.at(L.ia3_scale(l)).value.values = acc.dscale[l];
      break;
  }

  for (auto& s : g.segments)
    if (!s.hot) std::fill(s.value.values.begin(), s.value.values.end(), 0.0);

  if (!hooks.empty()) {
    const FlatVector hot = hot_vector(p);
    FlatVector hot_grad = hot_vector(g);
    for (const auto& hook : hooks) out.loss += hook->parameter_term(hot, hot_grad);
    set_hot_vector(g, hot_grad);
  }
  return out;
}

}  // namespace detail

LossAndGrad loss_and_grad_reference(const ParamSet& params, const Batch& batch, const HookList& hooks) {
  if (batch.size() == 0) fail(ErrorKind::Input, "loss_and_grad on an empty batch");
  if (batch.labels.size() != batch.size()) fail(ErrorKind::Input, "loss_and_grad needs one label per sequence");
  validate_batch(params, batch);
  const detail::Workspace ws(params);
  std::vector<detail::SampleCache> caches(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) detail::sample_forward(ws, batch.tokens[i], caches[i]);

  double ce = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) ce -= caches[i].log_probs[static_cast<std::size_t>(batch.labels[i])];
  const double data_loss = ce / static_cast<double>(batch.size());
  double loss = data_loss;

  Matrix rep_grad;
  loss += detail::run_representation_hooks(hooks, batch, caches, rep_grad);

  detail::Accum acc(ws);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto dl = detail::logit_grad(caches[i], batch.labels[i], batch.size());
    std::span<const double> dz;
    if (rep_grad.rows) dz = rep_grad.row(i);
    detail::sample_backward(ws, caches[i], dl, dz, acc);
  }
  return detail::finalize(ws, acc, loss, data_loss, hooks);
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const auto row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
      if (row[k] > row[best]) best = k;
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const ParamSet& params, const Batch& batch) { return argmax_rows(forward(params, batch).logits); }

void gradient_step(ParamSet& params, const ParamSet& grads, double learning_rate) {
  if (grads.segments.size() != params.segments.size()) fail(ErrorKind::Dimension, "gradient shape mismatch");
  for (std::size_t k = 0; k < params.segments.size(); ++k) {
    auto& seg = params.segments[k];
    if (!seg.hot) continue;
    const auto& g = grads.segments[k].value.values;
    if (g.size() != seg.value.values.size()) fail(ErrorKind::Dimension, "gradient shape mismatch in " + seg.name);
    for (std::size_t i = 0; i < g.size(); ++i) seg.value.values[i] -= learning_rate * g[i];
  }
}

}  // namespace fedvuln
