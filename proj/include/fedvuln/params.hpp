#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedvuln/numkit.hpp"

namespace fedvuln {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t n_blocks = 1;
  std::size_t hidden_dim = 64;
  std::size_t n_classes = 2;
  std::size_t max_len = 256;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class SchemeKind { Full, PTuningV1, PTuningV2, Lora, Loha, Ia3 };

std::string to_string(SchemeKind kind);
SchemeKind parse_scheme_kind(const std::string& s);

struct SchemeSpec {
  SchemeKind kind = SchemeKind::Full;
  std::size_t rank = 4;        // lora / loha
  std::size_t n_prompt = 4;    // ptv1
  double alpha_scale = 8.0;    // lora / loha; update scaled by alpha_scale / rank
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SchemeSpec&) const = default;
};

/// One named parameter tensor. Vectors are n x 1.
struct Segment {
  std::string name;
  Matrix value;
  bool hot = true;

  bool operator==(const Segment&) const = default;
};

/// Segment positions for a (config, scheme) pair.
///
/// Canonical order (flatten layout, version 1):
///   embedding;
///   per block: W1 (hidden x embed), b1, W2 (embed x hidden), b2;
///   head: Wh (classes x embed), bh;
///   adapters in attach order:
///     ptv1: prompt (n_prompt x embed), reparam W (embed x embed), reparam b
///     ptv2: one prefix (embed) per block
///     lora: per block, for W1 then W2: A (out x r), B (r x in)
///     loha: per block, for W1 then W2: A1, B1, A2, B2
///     ia3:  one scale vector (hidden) per block
struct Layout {
  ModelConfig config;
  SchemeSpec scheme;

  Layout(const ModelConfig& c, const SchemeSpec& s) : config(c), scheme(s) {}

  static constexpr std::size_t embedding() { return 0; }
  std::size_t w1(std::size_t block) const { return 1 + 4 * block; }
  std::size_t b1(std::size_t block) const { return 2 + 4 * block; }
  std::size_t w2(std::size_t block) const { return 3 + 4 * block; }
  std::size_t b2(std::size_t block) const { return 4 + 4 * block; }
  std::size_t head_w() const { return 1 + 4 * config.n_blocks; }
  std::size_t head_b() const { return 2 + 4 * config.n_blocks; }
  std::size_t backbone_segments() const { return 3 + 4 * config.n_blocks; }

  std::size_t prompt() const { return backbone_segments(); }
  std::size_t prompt_w() const { return backbone_segments() + 1; }
  std::size_t prompt_b() const { return backbone_segments() + 2; }
  std::size_t prefix(std::size_t block) const { return backbone_segments() + block; }
  std::size_t ia3_scale(std::size_t block) const { return backbone_segments() + block; }
  // which: 0 = W1, 1 = W2
  std::size_t lora_a(std::size_t block, int which) const { return backbone_segments() + 4 * block + 2 * which; }
  std::size_t lora_b(std::size_t block, int which) const { return lora_a(block, which) + 1; }
  // part: 0 = A1, 1 = B1, 2 = A2, 3 = B2
  std::size_t loha(std::size_t block, int which, int part) const {
    return backbone_segments() + 8 * block + 4 * which + part;
  }

  std::size_t total_segments() const;
};

struct ParamSet {
  ModelConfig config;
  SchemeSpec scheme;
  std::vector<Segment> segments;

  Layout layout() const { return {config, scheme}; }
  Segment& at(std::size_t i) { return segments.at(i); }
  const Segment& at(std::size_t i) const { return segments.at(i); }

  std::size_t total_count() const;
  std::size_t backbone_count() const;
  std::size_t hot_count() const;

  /// Same shape, all values zero, same hot mask.
  ParamSet zeros_like() const;

  bool operator==(const ParamSet&) const = default;
};

FlatVector flatten(const ParamSet& params);
ParamSet unflatten(const FlatVector& v, const ParamSet& shape_of);

/// Concatenation of the hot segments in canonical order.
FlatVector hot_vector(const ParamSet& params);
void set_hot_vector(ParamSet& params, const FlatVector& v);

}  // namespace fedvuln
