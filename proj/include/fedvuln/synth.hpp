#pragma once

// Seeded generator for a small C-like vulnerability corpus.
//
// Every sample is a token-pattern slice over a shared pool of filler
// identifiers. A vulnerable sample additionally carries one or more "motif"
// sink names; each CWE category owns its own pool of motif names, so the
// signal for a category is spread over many rare tokens. A client holding a
// small shard only sees part of every pool, which is what makes pooling data
// across clients worthwhile.
//
// A single shared "cue" identifier appears in vulnerable samples more often
// than in secure ones. It is weakly predictive but frequent, so every client
// can pick it up early in training.

#include <cstddef>
#include <cstdint>
#include <string>

namespace fedvuln {

struct SynthSpec {
  std::size_t n_samples = 4000;
  double vulnerable_fraction = 0.45;
  std::size_t n_categories = 6;          // at most 29
  std::size_t motifs_per_category = 80;
  std::size_t motifs_per_sample = 1;
  std::size_t motif_repeats = 2;         // call sites per drawn motif
  double cue_rate_vulnerable = 0.8;      // P(cue | vulnerable)
  double cue_rate_secure = 0.2;          // P(cue | secure)
  std::size_t n_filler = 200;
  std::size_t min_tokens = 2;
  std::size_t max_tokens = 6;
  std::size_t n_projects = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One {"code","label","cwe","project"} record per line.
std::string generate_synthetic_jsonl(const SynthSpec& spec);

/// CWE tag of category index i (fixed list).
std::string synthetic_category(std::size_t i);

}  // namespace fedvuln
