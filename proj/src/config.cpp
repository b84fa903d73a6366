#include "fedvuln/config.hpp"

#include <set>

#include "fedvuln/errors.hpp"
#include "fedvuln/serialize.hpp"

namespace fedvuln {

using nlohmann::json;

namespace {

/// Reads the keys of one JSON object and rejects any key nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : path_(std::move(path)) {
    if (!j.is_object()) fail(ErrorKind::Config, where() + " must be an object");
    j_ = &j;
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, _] : j_->items())
      if (!seen_.count(k)) fail(ErrorKind::Config, "unknown key '" + key_path(k) + "'");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_->find(key);
    if (it == j_->end()) return;
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!it->is_number_unsigned()) fail(ErrorKind::Config, key_path(key) + " must be a nonnegative integer");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) fail(ErrorKind::Config, key_path(key) + " must be a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) fail(ErrorKind::Config, key_path(key) + " must be a string");
      }
      out = it->get<T>();
    } catch (const json::exception& e) {
      fail(ErrorKind::Config, key_path(key) + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_->find(key);
    return it == j_->end() || it->is_null() ? nullptr : &*it;
  }

  std::string key_path(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const json* j_ = nullptr;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Enum, typename Parse>
void get_enum(Section& s, const char* key, Enum& out, Parse parse) {
  std::string text;
  bool present = false;
  if (const json* c = s.child(key)) {
    if (!c->is_string()) fail(ErrorKind::Config, s.key_path(key) + " must be a string");
    text = c->get<std::string>();
    present = true;
  }
  if (!present) return;
  try {
    out = parse(text);
  } catch (const Error& e) {
    fail(ErrorKind::Config, s.key_path(key) + ": " + e.detail());
  }
}

SynthSpec parse_synth(const json& j) {
  SynthSpec out;
  Section s(j, "dataset.synthetic");
  s.get("n_samples", out.n_samples);
  s.get("vulnerable_fraction", out.vulnerable_fraction);
  s.get("n_categories", out.n_categories);
  s.get("motifs_per_category", out.motifs_per_category);
  s.get("motifs_per_sample", out.motifs_per_sample);
  s.get("motif_repeats", out.motif_repeats);
  s.get("cue_rate_vulnerable", out.cue_rate_vulnerable);
  s.get("cue_rate_secure", out.cue_rate_secure);
  s.get("n_filler", out.n_filler);
  s.get("min_tokens", out.min_tokens);
  s.get("max_tokens", out.max_tokens);
  s.get("n_projects", out.n_projects);
  s.get("seed", out.seed);
  return out;
}

PartitionMode parse_partition_mode(const std::string& s) {
  if (s == "iid") return PartitionMode::Iid;
  if (s == "dirichlet") return PartitionMode::Dirichlet;
  fail(ErrorKind::Config, "unknown partition mode '" + s + "'");
}

std::string to_string(PartitionMode m) { return m == PartitionMode::Iid ? "iid" : "dirichlet"; }

ClusterMode parse_cluster_mode(const std::string& s) {
  if (s == "similarity") return ClusterMode::Similarity;
  if (s == "size") return ClusterMode::Size;
  fail(ErrorKind::Config, "unknown cluster mode '" + s + "'");
}

MaskGranularity parse_granularity(const std::string& s) {
  if (s == "segment") return MaskGranularity::Segment;
  if (s == "parameter") return MaskGranularity::Parameter;
  fail(ErrorKind::Config, "unknown mutation granularity '" + s + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!dataset.synthetic && dataset.paths.empty())
    fail(ErrorKind::Config, "dataset needs either 'paths' or 'synthetic'");
  if (dataset.synthetic && !dataset.paths.empty())
    fail(ErrorKind::Config, "dataset takes 'paths' or 'synthetic', not both");
  if (dataset.synthetic) dataset.synthetic->validate();
  if (corpus.max_len < 1) fail(ErrorKind::Config, "corpus.max_len must be positive");
  if (corpus.vocab_max_size < 3) fail(ErrorKind::Config, "corpus.vocab_max_size must be at least 3");
  if (!(corpus.train_fraction > 0.0 && corpus.train_fraction < 1.0))
    fail(ErrorKind::Config, "corpus.train_fraction must lie in (0, 1)");
  partition.validate();
  ModelConfig m = model;
  m.vocab_size = std::max<std::size_t>(m.vocab_size, 2);
  m.validate();
  scheme.validate();
  federation.validate();
  if (federation.n_clients != partition.n_clients)
    fail(ErrorKind::Config, "federation and partition disagree on the client count");
  if (baseline.client >= partition.n_clients) fail(ErrorKind::Config, "baseline.client is not a valid client id");
  if (output_dir.empty()) fail(ErrorKind::Config, "output_dir must not be empty");
}

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  {
    Section root(j, "");
    if (const json* d = root.child("dataset")) {
      Section s(*d, "dataset");
      if (const json* p = s.child("paths")) {
        if (!p->is_array()) fail(ErrorKind::Config, "dataset.paths must be an array of strings");
        for (const auto& e : *p) {
          if (!e.is_string()) fail(ErrorKind::Config, "dataset.paths must be an array of strings");
          std::filesystem::path path = e.get<std::string>();
          c.dataset.paths.push_back(path.is_relative() && !base_dir.empty() ? base_dir / path : path);
        }
      }
      get_enum(s, "form", c.dataset.form, [](const std::string& t) { return parse_raw_form(t); });
      if (const json* syn = s.child("synthetic")) c.dataset.synthetic = parse_synth(*syn);
    }
    if (const json* d = root.child("corpus")) {
      Section s(*d, "corpus");
      s.get("max_len", c.corpus.max_len);
      s.get("vocab_max_size", c.corpus.vocab_max_size);
      s.get("min_count", c.corpus.min_count);
      s.get("train_fraction", c.corpus.train_fraction);
      s.get("seed", c.corpus.seed);
    }
    if (const json* d = root.child("partition")) {
      Section s(*d, "partition");
      s.get("n_clients", c.partition.n_clients);
      get_enum(s, "mode", c.partition.mode, parse_partition_mode);
      s.get("alpha", c.partition.alpha);
      s.get("seed", c.partition.seed);
    }
    if (const json* d = root.child("model")) {
      Section s(*d, "model");
      s.get("embed_dim", c.model.embed_dim);
      s.get("n_blocks", c.model.n_blocks);
      s.get("hidden_dim", c.model.hidden_dim);
      s.get("seed", c.model.seed);
    }
    if (const json* d = root.child("scheme")) {
      Section s(*d, "scheme");
      get_enum(s, "kind", c.scheme.kind, parse_scheme_kind);
      s.get("rank", c.scheme.rank);
      s.get("n_prompt", c.scheme.n_prompt);
      s.get("alpha_scale", c.scheme.alpha_scale);
      s.get("seed", c.scheme.seed);
    }
    if (const json* d = root.child("federation")) {
      Section s(*d, "federation");
      auto& f = c.federation;
      s.get("rounds", f.rounds);
      s.get("select_fraction", f.select_fraction);
      s.get("local_epochs", f.local_epochs);
      s.get("batch_size", f.batch_size);
      s.get("learning_rate", f.learning_rate);
      get_enum(s, "algorithm", f.algorithm, parse_algorithm);
      s.get("seed", f.seed);
      s.get("workers", f.workers);
      s.get("checkpoint_every", c.checkpoint_every);
      if (const json* p = s.child("algorithm_params")) {
        Section a(*p, "federation.algorithm_params");
        a.get("mu", f.params.mu);
        a.get("tau", f.params.tau);
        a.get("contrastive_weight", f.params.contrastive_weight);
        a.get("n_clusters", f.params.n_clusters);
        get_enum(a, "cluster_mode", f.params.cluster_mode, parse_cluster_mode);
        a.get("cross_alpha", f.params.cross_alpha);
        a.get("mutate_beta", f.params.mutate_beta);
        get_enum(a, "mutate_granularity", f.params.mutate_granularity, parse_granularity);
      }
    }
    if (const json* d = root.child("baseline")) {
      Section s(*d, "baseline");
      s.get("client", c.baseline.client);
    }
    std::string out_dir = c.output_dir.string();
    root.get("output_dir", out_dir);
    c.output_dir = out_dir;
  }
  c.model.max_len = c.corpus.max_len;
  c.federation.n_clients = c.partition.n_clients;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, path.string() + ": malformed config (" + e.what() + ")");
  }
  try {
    return parse_config(j, path.parent_path());
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.detail());
  }
}

void apply_seed_override(ExperimentConfig& config, std::uint64_t seed) {
  if (config.dataset.synthetic) config.dataset.synthetic->seed = seed;
  config.corpus.seed = seed;
  config.partition.seed = seed;
  config.model.seed = seed;
  config.scheme.seed = seed;
  config.federation.seed = seed;
}

json to_json(const ExperimentConfig& c) {
  json dataset{{"form", to_string(c.dataset.form)}};
  json paths = json::array();
  for (const auto& p : c.dataset.paths) paths.push_back(p.generic_string());
  dataset["paths"] = paths;
  if (const auto& s = c.dataset.synthetic) {
    dataset["synthetic"] = {{"n_samples", s->n_samples},           {"vulnerable_fraction", s->vulnerable_fraction},
                            {"n_categories", s->n_categories},     {"motifs_per_category", s->motifs_per_category},
                            {"motifs_per_sample", s->motifs_per_sample}, {"motif_repeats", s->motif_repeats},
                            {"cue_rate_vulnerable", s->cue_rate_vulnerable}, {"cue_rate_secure", s->cue_rate_secure},
                            {"n_filler", s->n_filler},
                            {"min_tokens", s->min_tokens}, {"max_tokens", s->max_tokens},
                            {"n_projects", s->n_projects},         {"seed", s->seed}};
  }
  const auto& f = c.federation;
  return {
      {"dataset", dataset},
      {"corpus",
       {{"max_len", c.corpus.max_len},
        {"vocab_max_size", c.corpus.vocab_max_size},
        {"min_count", c.corpus.min_count},
        {"train_fraction", c.corpus.train_fraction},
        {"seed", c.corpus.seed}}},
      {"partition",
       {{"n_clients", c.partition.n_clients},
        {"mode", to_string(c.partition.mode)},
        {"alpha", c.partition.alpha},
        {"seed", c.partition.seed}}},
      {"model",
       {{"embed_dim", c.model.embed_dim},
        {"n_blocks", c.model.n_blocks},
        {"hidden_dim", c.model.hidden_dim},
        {"seed", c.model.seed}}},
      {"scheme",
       {{"kind", to_string(c.scheme.kind)},
        {"rank", c.scheme.rank},
        {"n_prompt", c.scheme.n_prompt},
        {"alpha_scale", c.scheme.alpha_scale},
        {"seed", c.scheme.seed}}},
      {"federation",
       {{"rounds", f.rounds},
        {"select_fraction", f.select_fraction},
        {"local_epochs", f.local_epochs},
        {"batch_size", f.batch_size},
        {"learning_rate", f.learning_rate},
        {"algorithm", to_string(f.algorithm)},
        {"seed", f.seed},
        {"workers", f.workers},
        {"checkpoint_every", c.checkpoint_every},
        {"algorithm_params",
         {{"mu", f.params.mu},
          {"tau", f.params.tau},
          {"contrastive_weight", f.params.contrastive_weight},
          {"n_clusters", f.params.n_clusters},
          {"cluster_mode", f.params.cluster_mode == ClusterMode::Similarity ? "similarity" : "size"},
          {"cross_alpha", f.params.cross_alpha},
          {"mutate_beta", f.params.mutate_beta},
          {"mutate_granularity", f.params.mutate_granularity == MaskGranularity::Segment ? "segment" : "parameter"}}}}},
      {"baseline", {{"client", c.baseline.client}}},
      {"output_dir", c.output_dir.generic_string()}};
}

}  // namespace fedvuln
