#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedvuln/corpus.hpp"
#include "fedvuln/fedcore.hpp"
#include "fedvuln/params.hpp"
#include "fedvuln/partition.hpp"
#include "fedvuln/synth.hpp"

namespace fedvuln {

struct DatasetOptions {
  std::vector<std::filesystem::path> paths;  // JSONL files, concatenated in order
  RawForm form = RawForm::SourceCode;
  std::optional<SynthSpec> synthetic;        // used instead of paths when present
};

struct CorpusOptions {
  std::size_t max_len = 64;
  std::size_t vocab_max_size = 5000;
  std::size_t min_count = 100;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct BaselineOptions {
  std::size_t client = 0;  // the isolated client whose report is compared
};

/// One experiment, fully described by a JSON file. Every key is optional and
/// defaults as documented in README.md; unknown keys are rejected.
/// model.vocab_size comes from the prepared vocabulary, model.max_len from
/// corpus.max_len, and federation.n_clients from partition.n_clients.
struct ExperimentConfig {
  DatasetOptions dataset;
  CorpusOptions corpus;
  PartitionSpec partition;
  ModelConfig model;
  SchemeSpec scheme;
  FederationConfig federation;
  std::size_t checkpoint_every = 0;  // 0 = final checkpoint only
  BaselineOptions baseline;
  std::filesystem::path output_dir = "runs/default";

  void validate() const;
};

/// `base_dir` resolves relative dataset paths.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Replaces every seed in the config with `seed`.
void apply_seed_override(ExperimentConfig& config, std::uint64_t seed);

/// Canonical JSON echo of the config (all keys, defaults filled in).
nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace fedvuln
