#pragma once

// The batch experiment commands behind the CLI. Output layout under the
// configured output directory:
//
//   prepared/manifest.json  data config echo, vocabulary, histograms, shard sizes
//   prepared/train.jsonl    encoded training samples
//   prepared/test.jsonl     encoded test samples
//   prepared/shards.jsonl   one {client_id, sample_id} record per training sample
//   run/                    config.json, trace.jsonl, report.json, report.csv,
//                           checkpoints/round_NNNN.fvck, final.fvck
//   baseline/               client_NN.json per client, report.json (baseline.client),
//                           report.csv, summary.json
//   compare/                comparison.csv, comparison.txt

#include <exception>
#include <filesystem>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "fedvuln/config.hpp"

namespace fedvuln {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitIo = 2, kExitRuntime = 3 };

/// Validation: config, schema, record, input and partition errors.
/// I/O: file system errors. Runtime: everything else.
int exit_code_for(const std::exception& e);

struct PreparedData {
  Dataset train;
  Dataset test;
  std::vector<ClientShard> shards;
};

/// load -> clean -> vocab -> split -> encode -> partition, in memory.
PreparedData prepare_data(const ExperimentConfig& config, std::ostream& log);
/// Manifest for prepared data; deterministic for a given config.
nlohmann::json prepared_manifest(const ExperimentConfig& config, const PreparedData& data);

PreparedData load_prepared(const ExperimentConfig& config);

/// Freshly initialised model with the configured scheme attached.
ParamSet initial_model(const ExperimentConfig& config, std::size_t vocab_size);
std::vector<LabeledData> client_datasets(const PreparedData& data);

/// Mean F1 over all clients trained in isolation.
struct BaselineSummary {
  std::vector<EvaluationReport> per_client;
  double mean_f1 = 0.0;
};
BaselineSummary run_baselines(const ExperimentConfig& config, const PreparedData& data);

void cmd_synth(const ExperimentConfig& config, std::ostream& log);
void cmd_prepare(const ExperimentConfig& config, std::ostream& log);
void cmd_run(const ExperimentConfig& config, std::ostream& log);
void cmd_baseline(const ExperimentConfig& config, std::ostream& log);
/// Each input is a report.json or a directory containing one.
void cmd_compare(const std::filesystem::path& federated, const std::filesystem::path& independent,
                 const std::filesystem::path& out_dir, std::ostream& log);
void cmd_report(const std::filesystem::path& run_dir, std::ostream& out);

}  // namespace fedvuln
