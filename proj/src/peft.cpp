#include "fedvuln/peft.hpp"

#include <cmath>
#include <random>

#include "fedvuln/errors.hpp"

namespace fedvuln {

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : m.values) v = dist(rng);
  return m;
}

void check_plain(const ParamSet& params) {
  params.config.validate();
  const Layout plain(params.config, SchemeSpec{});
  if (params.scheme.kind != SchemeKind::Full || params.segments.size() != plain.total_segments())
    fail(ErrorKind::Config, "attach expects an unadapted parameter set");
  const auto& c = params.config;
  auto expect = [&](std::size_t idx, std::size_t r, std::size_t k) {
    const auto& m = params.segments[idx].value;
    if (m.rows != r || m.cols != k)
      fail(ErrorKind::Config, "segment " + params.segments[idx].name + " has shape " + std::to_string(m.rows) +
                                  "x" + std::to_string(m.cols) + ", expected " + std::to_string(r) + "x" +
                                  std::to_string(k));
  };
  expect(plain.embedding(), c.vocab_size, c.embed_dim);
  for (std::size_t l = 0; l < c.n_blocks; ++l) {
    expect(plain.w1(l), c.hidden_dim, c.embed_dim);
    expect(plain.b1(l), c.hidden_dim, 1);
    expect(plain.w2(l), c.embed_dim, c.hidden_dim);
    expect(plain.b2(l), c.embed_dim, 1);
  }
  expect(plain.head_w(), c.n_classes, c.embed_dim);
  expect(plain.head_b(), c.n_classes, 1);
}

}  // namespace

ParamSet attach(const SchemeSpec& scheme, const ParamSet& params) {
  scheme.validate();
  check_plain(params);
  ParamSet out = params;
  out.scheme = scheme;
  const auto& c = params.config;
  const Layout layout = out.layout();

  const bool full = scheme.kind == SchemeKind::Full;
  for (auto& s : out.segments) s.hot = full;
  out.segments[layout.head_w()].hot = true;
  out.segments[layout.head_b()].hot = true;

  Rng rng(derive_seed(scheme.seed, 0x70ef7));
  auto add = [&](std::string name, Matrix m) { out.segments.push_back({std::move(name), std::move(m), true}); };
  const std::size_t r = scheme.rank;

  switch (scheme.kind) {
    case SchemeKind::Full:
      break;
    case SchemeKind::PTuningV1:
      add("prompt", uniform_matrix(scheme.n_prompt, c.embed_dim, 1.0, rng));
      add("prompt.reparam.W", uniform_matrix(c.embed_dim, c.embed_dim, 1.0 / std::sqrt(double(c.embed_dim)), rng));
      add("prompt.reparam.b", Matrix(c.embed_dim, 1));
      break;
    case SchemeKind::PTuningV2:
      for (std::size_t l = 0; l < c.n_blocks; ++l) add("block" + std::to_string(l) + ".prefix", Matrix(c.embed_dim, 1));
      break;
    case SchemeKind::Lora:
      for (std::size_t l = 0; l < c.n_blocks; ++l) {
        const std::string p = "block" + std::to_string(l);
        add(p + ".W1.lora_A", uniform_matrix(c.hidden_dim, r, 1.0 / std::sqrt(double(c.embed_dim)), rng));
        add(p + ".W1.lora_B", Matrix(r, c.embed_dim));
        add(p + ".W2.lora_A", uniform_matrix(c.embed_dim, r, 1.0 / std::sqrt(double(c.hidden_dim)), rng));
        add(p + ".W2.lora_B", Matrix(r, c.hidden_dim));
      }
      break;
    case SchemeKind::Loha:
      // A1*B1 starts at zero and A2*B2 at all-ones, so the update starts at zero.
      for (std::size_t l = 0; l < c.n_blocks; ++l) {
        const std::string p = "block" + std::to_string(l);
        const std::size_t outs[2] = {c.hidden_dim, c.embed_dim};
        const std::size_t ins[2] = {c.embed_dim, c.hidden_dim};
        const char* names[2] = {".W1", ".W2"};
        for (int w = 0; w < 2; ++w) {
          add(p + names[w] + ".loha_A1", uniform_matrix(outs[w], r, 1.0 / std::sqrt(double(ins[w])), rng));
          add(p + names[w] + ".loha_B1", Matrix(r, ins[w]));
          add(p + names[w] + ".loha_A2", Matrix(outs[w], r, 1.0));
          add(p + names[w] + ".loha_B2", Matrix(r, ins[w], 1.0 / double(r)));
        }
      }
      break;
    case SchemeKind::Ia3:
      for (std::size_t l = 0; l < c.n_blocks; ++l) add("block" + std::to_string(l) + ".ia3", Matrix(c.hidden_dim, 1, 1.0));
      break;
  }
  return out;
}

Matrix adapter_delta(const ParamSet& params, std::size_t block, int which) {
  const Layout layout = params.layout();
  const auto& base = params.at(which == 0 ? layout.w1(block) : layout.w2(block)).value;
  const double scale = params.scheme.alpha_scale / static_cast<double>(params.scheme.rank);
  if (params.scheme.kind == SchemeKind::Lora) {
    Matrix d = matmul(params.at(layout.lora_a(block, which)).value, params.at(layout.lora_b(block, which)).value);
    for (auto& v : d.values) v *= scale;
    return d;
  }
  if (params.scheme.kind == SchemeKind::Loha) {
    const Matrix m1 = matmul(params.at(layout.loha(block, which, 0)).value, params.at(layout.loha(block, which, 1)).value);
    const Matrix m2 = matmul(params.at(layout.loha(block, which, 2)).value, params.at(layout.loha(block, which, 3)).value);
    Matrix d(m1.rows, m1.cols);
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = scale * m1.values[i] * m2.values[i];
    return d;
  }
  return Matrix(base.rows, base.cols);
}

ParamSet effective_params(const ParamSet& params) {
  const auto kind = params.scheme.kind;
  if (kind != SchemeKind::Lora && kind != SchemeKind::Loha && kind != SchemeKind::Ia3) return params;

  const Layout layout = params.layout();
  ParamSet out;
  out.config = params.config;
  out.scheme = SchemeSpec{};
  out.segments.assign(params.segments.begin(),
                      params.segments.begin() + static_cast<std::ptrdiff_t>(layout.backbone_segments()));
  for (std::size_t l = 0; l < params.config.n_blocks; ++l) {
    if (kind == SchemeKind::Ia3) {
      // W2 * diag(scale)
      const auto& scale = params.at(layout.ia3_scale(l)).value.values;
      auto& w2 = out.at(layout.w2(l)).value;
      for (std::size_t i = 0; i < w2.rows; ++i)
        for (std::size_t j = 0; j < w2.cols; ++j) w2(i, j) *= scale[j];
    } else {
      for (int w = 0; w < 2; ++w) {
        auto& base = out.at(w == 0 ? layout.w1(l) : layout.w2(l)).value;
        const Matrix d = adapter_delta(params, l, w);
        for (std::size_t i = 0; i < base.values.size(); ++i) base.values[i] += d.values[i];
      }
    }
  }
  for (auto& s : out.segments) s.hot = true;
  return out;
}

double hot_param_rate(const ParamSet& params) {
  return static_cast<double>(params.hot_count()) / static_cast<double>(params.backbone_count());
}

}  // namespace fedvuln
