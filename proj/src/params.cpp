#include "fedvuln/params.hpp"

#include <algorithm>
#include <cmath>

#include "fedvuln/errors.hpp"

namespace fedvuln {

void ModelConfig::validate() const {
  if (vocab_size < 2 || embed_dim < 1 || n_blocks < 1 || hidden_dim < 1 || max_len < 1)
    fail(ErrorKind::Config, "model dimensions must be positive (vocab_size >= 2)");
  if (n_classes < 2) fail(ErrorKind::Config, "model needs at least 2 classes");
}

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::Full: return "full";
    case SchemeKind::PTuningV1: return "ptv1";
    case SchemeKind::PTuningV2: return "ptv2";
    case SchemeKind::Lora: return "lora";
    case SchemeKind::Loha: return "loha";
    case SchemeKind::Ia3: return "ia3";
  }
  return "full";
}

SchemeKind parse_scheme_kind(const std::string& s) {
  if (s == "full") return SchemeKind::Full;
  if (s == "ptv1") return SchemeKind::PTuningV1;
  if (s == "ptv2") return SchemeKind::PTuningV2;
  if (s == "lora") return SchemeKind::Lora;
  if (s == "loha") return SchemeKind::Loha;
  if (s == "ia3") return SchemeKind::Ia3;
  fail(ErrorKind::Config, "unknown scheme kind '" + s + "'");
}

void SchemeSpec::validate() const {
  if ((kind == SchemeKind::Lora || kind == SchemeKind::Loha) && rank < 1)
    fail(ErrorKind::Config, "adapter rank must be at least 1");
  if (kind == SchemeKind::PTuningV1 && n_prompt < 1) fail(ErrorKind::Config, "ptv1 needs n_prompt >= 1");
  if (!std::isfinite(alpha_scale)) fail(ErrorKind::Config, "alpha_scale must be finite");
}

std::size_t Layout::total_segments() const {
  const std::size_t base = backbone_segments();
  switch (scheme.kind) {
    case SchemeKind::Full: return base;
    case SchemeKind::PTuningV1: return base + 3;
    case SchemeKind::PTuningV2: return base + config.n_blocks;
    case SchemeKind::Lora: return base + 4 * config.n_blocks;
    case SchemeKind::Loha: return base + 8 * config.n_blocks;
    case SchemeKind::Ia3: return base + config.n_blocks;
  }
  return base;
}

std::size_t ParamSet::total_count() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.value.size();
  return n;
}

std::size_t ParamSet::backbone_count() const {
  std::size_t n = 0;
  const std::size_t k = layout().backbone_segments();
  for (std::size_t i = 0; i < k && i < segments.size(); ++i) n += segments[i].value.size();
  return n;
}

std::size_t ParamSet::hot_count() const {
  std::size_t n = 0;
  for (const auto& s : segments)
    if (s.hot) n += s.value.size();
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out = *this;
  for (auto& s : out.segments) std::fill(s.value.values.begin(), s.value.values.end(), 0.0);
  return out;
}

FlatVector flatten(const ParamSet& params) {
  FlatVector v;
  v.reserve(params.total_count());
  for (const auto& s : params.segments) v.insert(v.end(), s.value.values.begin(), s.value.values.end());
  return v;
}

ParamSet unflatten(const FlatVector& v, const ParamSet& shape_of) {
  if (v.size() != shape_of.total_count())
    fail(ErrorKind::Dimension, "unflatten expects " + std::to_string(shape_of.total_count()) + " values, got " +
                                   std::to_string(v.size()));
  ParamSet out = shape_of;
  std::size_t pos = 0;
  for (auto& s : out.segments) {
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(pos),
              v.begin() + static_cast<std::ptrdiff_t>(pos + s.value.size()), s.value.values.begin());
    pos += s.value.size();
  }
  return out;
}

FlatVector hot_vector(const ParamSet& params) {
  FlatVector v;
  v.reserve(params.hot_count());
  for (const auto& s : params.segments)
    if (s.hot) v.insert(v.end(), s.value.values.begin(), s.value.values.end());
  return v;
}

void set_hot_vector(ParamSet& params, const FlatVector& v) {
  if (v.size() != params.hot_count())
    fail(ErrorKind::Dimension, "hot vector length " + std::to_string(v.size()) + " does not match hot count " +
                                   std::to_string(params.hot_count()));
  std::size_t pos = 0;
  for (auto& s : params.segments) {
    if (!s.hot) continue;
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(pos),
              v.begin() + static_cast<std::ptrdiff_t>(pos + s.value.size()), s.value.values.begin());
    pos += s.value.size();
  }
}

}  // namespace fedvuln
