#include "fedvuln/commands.hpp"

#include <cstdio>
#include <sstream>

#include <omp.h>

#include "fedvuln/errors.hpp"
#include "fedvuln/peft.hpp"
#include "fedvuln/serialize.hpp"
#include "fedvuln/synth.hpp"

namespace fedvuln {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

fs::path prepared_dir(const ExperimentConfig& c) { return c.output_dir / "prepared"; }

/// The part of the config that determines prepared data.
json data_section(const ExperimentConfig& c) {
  const json all = to_json(c);
  return {{"dataset", all.at("dataset")}, {"corpus", all.at("corpus")}, {"partition", all.at("partition")}};
}

json histogram_json(const CategoryHistogram& h) {
  json j = json::object();
  for (const auto& [k, v] : h) j[k] = v;
  return j;
}

void print_histogram(std::ostream& log, const std::string& title, const CategoryHistogram& h) {
  log << title << '\n';
  for (const auto& [k, v] : h) log << "  " << k << ": " << v << '\n';
}

fs::path report_path(const fs::path& p) { return fs::is_directory(p) ? p / "report.json" : p; }

EvaluationReport load_report(const fs::path& p) {
  const auto path = report_path(p);
  if (!fs::exists(path)) fail(ErrorKind::Io, "report not found: " + path.string());
  try {
    return report_from_json(json::parse(read_text(path)));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Schema, path.string() + ": " + e.what());
  }
}

int worker_count(const ExperimentConfig& c) {
  return c.federation.workers == 0 ? omp_get_max_threads() : static_cast<int>(c.federation.workers);
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->kind()) {
      case ErrorKind::Config:
      case ErrorKind::Schema:
      case ErrorKind::Record:
      case ErrorKind::Input:
      case ErrorKind::Partition: return kExitValidation;
      case ErrorKind::Io: return kExitIo;
      default: return kExitRuntime;
    }
  }
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitIo;
  return kExitRuntime;
}

PreparedData prepare_data(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  Dataset raw;
  if (config.dataset.synthetic) {
    raw = parse_jsonl(generate_synthetic_jsonl(*config.dataset.synthetic), config.dataset.form, "<synthetic>");
  } else {
    for (const auto& path : config.dataset.paths) {
      if (!fs::exists(path)) fail(ErrorKind::Io, "dataset file not found: " + path.string());
      Dataset part = load_jsonl(path, config.dataset.form);
      for (auto& s : part.samples) {
        char id[24];
        std::snprintf(id, sizeof id, "%08zu", raw.size());
        s.sample_id = id;
        raw.samples.push_back(std::move(s));
      }
    }
    raw.recount();
  }
  log << "loaded " << raw.size() << " samples (" << raw.count(Label::Vulnerable) << " vulnerable)\n";

  Dataset cleaned = clean_min_count(raw, config.corpus.min_count);
  log << "kept " << cleaned.size() << " samples in " << cleaned.label_histogram.size()
      << " categories (min_count " << config.corpus.min_count << ")\n";
  cleaned.vocab = build_vocab(cleaned, config.corpus.vocab_max_size);
  encode_all(cleaned, config.corpus.max_len);

  auto [train, test] = split_train_test(cleaned, config.corpus.train_fraction, config.corpus.seed);
  PreparedData out{std::move(train), std::move(test), {}};
  out.shards = partition(out.train, config.partition);
  return out;
}

json prepared_manifest(const ExperimentConfig& config, const PreparedData& data) {
  json clients = json::array();
  for (const auto& s : data.shards)
    clients.push_back({{"client_id", s.client_id}, {"n_samples", s.size()}, {"histogram", histogram_json(s.label_histogram)}});
  return {{"version", kManifestVersion},
          {"config", data_section(config)},
          {"vocab", data.train.vocab.tokens()},
          {"n_train", data.train.size()},
          {"n_test", data.test.size()},
          {"train_histogram", histogram_json(data.train.label_histogram)},
          {"test_histogram", histogram_json(data.test.label_histogram)},
          {"mean_chi_square", mean_chi_square(data.train, data.shards)},
          {"clients", clients},
          {"files", {{"train", "train.jsonl"}, {"test", "test.jsonl"}, {"shards", "shards.jsonl"}}}};
}

PreparedData load_prepared(const ExperimentConfig& config) {
  const auto dir = prepared_dir(config);
  const auto manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path))
    fail(ErrorKind::Io, "prepared manifest not found: " + manifest_path.string() + " (run 'prepare' first)");
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Schema, manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("version", 0) != kManifestVersion)
    fail(ErrorKind::Schema, manifest_path.string() + ": unsupported manifest version");
  if (manifest.at("config") != data_section(config))
    fail(ErrorKind::Config, "prepared data in " + dir.string() + " was built from a different config; rerun 'prepare'");
  const Vocab vocab(manifest.at("vocab").get<std::vector<std::string>>());
  PreparedData out;
  out.train = parse_samples_jsonl(read_text(dir / "train.jsonl"), vocab, (dir / "train.jsonl").string());
  out.test = parse_samples_jsonl(read_text(dir / "test.jsonl"), vocab, (dir / "test.jsonl").string());
  out.shards = parse_shards_jsonl(read_text(dir / "shards.jsonl"), out.train);
  if (out.shards.size() != config.partition.n_clients)
    fail(ErrorKind::Config, "prepared shards do not match partition.n_clients");
  return out;
}

ParamSet initial_model(const ExperimentConfig& config, std::size_t vocab_size) {
  ModelConfig m = config.model;
  m.vocab_size = vocab_size;
  m.max_len = config.corpus.max_len;
  return attach(config.scheme, init(m));
}

std::vector<LabeledData> client_datasets(const PreparedData& data) {
  std::vector<LabeledData> out;
  for (const auto& s : data.shards) out.push_back(labeled(data.train, s.sample_indices));
  return out;
}

BaselineSummary run_baselines(const ExperimentConfig& config, const PreparedData& data) {
  const ParamSet initial = initial_model(config, data.train.vocab.size());
  const auto clients = client_datasets(data);
  const LabeledData test = labeled(data.test);
  BaselineSummary out;
  out.per_client.resize(clients.size());
  std::vector<std::exception_ptr> errors(clients.size());
#pragma omp parallel for schedule(dynamic) num_threads(worker_count(config))
  for (std::size_t c = 0; c < clients.size(); ++c) {
    try {
      out.per_client[c] = independent_baseline(c, clients[c], initial, config.federation, test);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (const auto& r : out.per_client) out.mean_f1 += r.f1;
  out.mean_f1 /= static_cast<double>(out.per_client.size());
  return out;
}

void cmd_synth(const ExperimentConfig& config, std::ostream& log) {
  if (!config.dataset.synthetic) fail(ErrorKind::Config, "config has no dataset.synthetic section");
  ensure_dir(config.output_dir);
  const auto path = config.output_dir / "synthetic.jsonl";
  write_text(path, generate_synthetic_jsonl(*config.dataset.synthetic));
  log << "wrote " << path.string() << '\n';
}

void cmd_prepare(const ExperimentConfig& config, std::ostream& log) {
  const PreparedData data = prepare_data(config, log);
  const auto dir = prepared_dir(config);
  ensure_dir(dir);
  write_text(dir / "train.jsonl", samples_jsonl(data.train));
  write_text(dir / "test.jsonl", samples_jsonl(data.test));
  write_text(dir / "shards.jsonl", shards_jsonl(data.train, data.shards));
  write_text(dir / "manifest.json", prepared_manifest(config, data).dump(2) + '\n');
  print_histogram(log, "train histogram (" + std::to_string(data.train.size()) + " samples)", data.train.label_histogram);
  print_histogram(log, "test histogram (" + std::to_string(data.test.size()) + " samples)", data.test.label_histogram);
  for (const auto& s : data.shards)
    log << "client " << s.client_id << ": " << s.size() << " samples, " << s.label_histogram.size() << " categories\n";
  log << "vocabulary: " << data.train.vocab.size() << " tokens\n"
      << "wrote " << dir.string() << '\n';
}

void cmd_run(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const PreparedData data = load_prepared(config);
  const ParamSet initial = initial_model(config, data.train.vocab.size());
  const auto clients = client_datasets(data);
  const LabeledData test = labeled(data.test);

  const auto dir = config.output_dir / "run";
  ensure_dir(dir / "checkpoints");
  write_text(dir / "config.json", to_json(config).dump(2) + '\n');
  log << "run: " << to_string(config.federation.algorithm) << " / " << to_string(config.scheme.kind) << ", "
      << config.federation.rounds << " rounds, hot parameter rate "
      << 100.0 * hot_param_rate(initial) << "%\n";

  std::string trace;
  const auto observer = [&](const RoundTrace& tr, const RoundState& st) {
    trace += to_json(tr).dump() + '\n';
    char line[160];
    std::snprintf(line, sizeof line, "round %3zu  loss %.4f  acc %.4f  f1 %.4f\n", tr.round, tr.mean_train_loss,
                  tr.metrics.accuracy, tr.metrics.f1);
    log << line;
    if (config.checkpoint_every > 0 && tr.round % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "round_%04zu.fvck", tr.round);
      write_bytes(dir / "checkpoints" / name, encode_checkpoint(st.global));
    }
  };
  const auto result = run_federation(config.federation, initial, clients, test, observer);

  write_text(dir / "trace.jsonl", trace);
  write_bytes(dir / "final.fvck", encode_checkpoint(result.final_state.global));
  write_text(dir / "report.json", to_json(result.report).dump(2) + '\n');
  write_text(dir / "report.csv", report_csv(result.report));
  log << "final f1 " << result.report.f1 << ", wrote " << dir.string() << '\n';
}

void cmd_baseline(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const PreparedData data = load_prepared(config);
  const auto summary = run_baselines(config, data);
  const auto dir = config.output_dir / "baseline";
  ensure_dir(dir);
  json clients = json::array();
  for (std::size_t c = 0; c < summary.per_client.size(); ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "client_%02zu.json", c);
    write_text(dir / name, to_json(summary.per_client[c]).dump(2) + '\n');
    clients.push_back({{"client_id", c}, {"f1", summary.per_client[c].f1}, {"accuracy", summary.per_client[c].accuracy}});
    log << "client " << c << ": f1 " << summary.per_client[c].f1 << '\n';
  }
  const auto& chosen = summary.per_client.at(config.baseline.client);
  write_text(dir / "report.json", to_json(chosen).dump(2) + '\n');
  write_text(dir / "report.csv", report_csv(chosen));
  write_text(dir / "summary.json",
             json{{"clients", clients}, {"mean_f1", summary.mean_f1}, {"report_client", config.baseline.client}}.dump(2) +
                 '\n');
  log << "mean isolated f1 " << summary.mean_f1 << ", wrote " << dir.string() << '\n';
}

void cmd_compare(const fs::path& federated, const fs::path& independent, const fs::path& out_dir, std::ostream& log) {
  const auto fl = load_report(federated);
  const auto indep = load_report(independent);
  const auto table = compare(indep, fl);
  ensure_dir(out_dir);
  write_text(out_dir / "comparison.csv", comparison_csv(table));
  write_text(out_dir / "comparison.txt", comparison_text(table));
  log << comparison_text(table);
}

void cmd_report(const fs::path& run_dir, std::ostream& out) {
  const auto r = load_report(run_dir);
  char line[200];
  std::snprintf(line, sizeof line, "accuracy %.4f  precision %.4f  recall %.4f  f1 %.4f\n", r.accuracy, r.precision,
                r.recall, r.f1);
  out << line << "confusion tp=" << r.confusion.tp << " fp=" << r.confusion.fp << " tn=" << r.confusion.tn
      << " fn=" << r.confusion.fn << '\n';
  for (const auto& [k, c] : r.per_category) {
    std::snprintf(line, sizeof line, "  %-12s %6zu samples  detection %.2f%%\n", k.c_str(), c.n_samples,
                  100.0 * c.detection_rate);
    out << line;
  }
  const auto trace_path = (fs::is_directory(run_dir) ? run_dir : run_dir.parent_path()) / "trace.jsonl";
  if (fs::exists(trace_path)) {
    std::istringstream in(read_text(trace_path));
    std::string l;
    std::size_t rounds = 0;
    while (std::getline(in, l))
      if (!l.empty()) ++rounds;
    out << "trace: " << rounds << " rounds\n";
  }
}

}  // namespace fedvuln
