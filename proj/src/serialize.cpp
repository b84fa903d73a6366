#include "fedvuln/serialize.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fedvuln/errors.hpp"

namespace fedvuln {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void f64s(const std::vector<double>& v) { raw(v.data(), v.size() * sizeof(double)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, const char* what) : bytes_(bytes), what_(what) {}
  void raw(void* p, std::size_t n) {
    if (n > bytes_.size() - pos_) fail(ErrorKind::Record, std::string(what_) + ": truncated payload");
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, sizeof v); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
  double f64() { double v; raw(&v, sizeof v); return v; }
  std::vector<double> f64s(std::uint64_t n) {
    if (n > (bytes_.size() - pos_) / sizeof(double)) fail(ErrorKind::Record, std::string(what_) + ": truncated payload");
    std::vector<double> v(n);
    raw(v.data(), n * sizeof(double));
    return v;
  }
  void magic(const char (&m)[5]) {
    char got[4];
    raw(got, 4);
    if (std::memcmp(got, m, 4) != 0) fail(ErrorKind::Record, std::string(what_) + ": bad magic");
    if (u32() != kVersion) fail(ErrorKind::Record, std::string(what_) + ": unsupported version");
  }
  void finish() const {
    if (pos_ != bytes_.size()) fail(ErrorKind::Record, std::string(what_) + ": trailing bytes");
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_update(const RoundUpdate& u) {
  Writer w;
  w.raw("FVRU", 4);
  w.u32(kVersion);
  w.u64(u.client_id);
  w.u64(u.n_samples);
  w.f64(u.train_loss);
  w.u64(u.hot_params.size());
  w.f64s(u.hot_params);
  return w.take();
}

RoundUpdate decode_update(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes, "round update");
  r.magic("FVRU");
  RoundUpdate u;
  u.client_id = r.u64();
  u.n_samples = r.u64();
  u.train_loss = r.f64();
  u.hot_params = r.f64s(r.u64());
  r.finish();
  return u;
}

std::vector<std::uint8_t> encode_checkpoint(const ParamSet& p) {
  Writer w;
  w.raw("FVCK", 4);
  w.u32(kVersion);
  w.u64(p.segments.size());
  for (const auto& s : p.segments) {
    w.u64(s.name.size());
    w.raw(s.name.data(), s.name.size());
    w.u64(s.value.rows);
    w.u64(s.value.cols);
    w.u8(s.hot ? 1 : 0);
    w.f64s(s.value.values);
  }
  return w.take();
}

ParamSet decode_checkpoint(const std::vector<std::uint8_t>& bytes, const ParamSet& shape_of) {
  Reader r(bytes, "checkpoint");
  r.magic("FVCK");
  ParamSet p = shape_of;
  if (r.u64() != p.segments.size()) fail(ErrorKind::Dimension, "checkpoint segment count does not match the model");
  for (auto& s : p.segments) {
    std::string name(r.u64(), '\0');
    r.raw(name.data(), name.size());
    const auto rows = r.u64(), cols = r.u64();
    if (name != s.name || rows != s.value.rows || cols != s.value.cols)
      fail(ErrorKind::Dimension, "checkpoint segment " + name + " does not match model segment " + s.name);
    s.hot = r.u8() != 0;
    s.value.values = r.f64s(rows * cols);
  }
  r.finish();
  return p;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorKind::Io, "write failed: " + path.string());
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot write " + path.string());
  f << text;
  if (!f) fail(ErrorKind::Io, "write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [k, c] : r.per_category)
    per[k] = {{"n_samples", c.n_samples}, {"n_detected", c.n_detected}, {"detection_rate", c.detection_rate}};
  return {{"accuracy", r.accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}}},
          {"per_category", per}};
}

EvaluationReport report_from_json(const nlohmann::json& j) {
  try {
    EvaluationReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    const auto& c = j.at("confusion");
    r.confusion = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("tn").get<std::size_t>(),
                   c.at("fn").get<std::size_t>()};
    for (const auto& [k, v] : j.at("per_category").items())
      r.per_category[k] = {v.at("n_samples").get<std::size_t>(), v.at("n_detected").get<std::size_t>(),
                           v.at("detection_rate").get<double>()};
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Schema, std::string("malformed report: ") + e.what());
  }
}

nlohmann::json to_json(const RoundTrace& t) {
  return {{"round", t.round},
          {"algorithm", to_string(t.algorithm)},
          {"selected", t.selected},
          {"mean_train_loss", t.mean_train_loss},
          {"uploaded_bytes", t.uploaded_bytes},
          {"metrics", to_json(t.metrics)}};
}

std::string shards_jsonl(const Dataset& train, const std::vector<ClientShard>& shards) {
  std::string out;
  for (const auto& s : shards)
    for (auto i : s.sample_indices)
      out += nlohmann::json{{"client_id", s.client_id}, {"sample_id", train.samples.at(i).sample_id}}.dump() + '\n';
  return out;
}

std::vector<ClientShard> parse_shards_jsonl(const std::string& text, const Dataset& train) {
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < train.size(); ++i) position[train.samples[i].sample_id] = i;
  std::vector<ClientShard> shards;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto client = j.at("client_id").get<std::size_t>();
      const auto id = j.at("sample_id").get<std::string>();
      const auto it = position.find(id);
      if (it == position.end()) fail(ErrorKind::Record, "shards line " + std::to_string(line_no) + ": unknown sample " + id);
      while (shards.size() <= client) shards.push_back(ClientShard{shards.size(), {}, {}});
      shards[client].sample_indices.push_back(it->second);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Record, "shards line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (auto& s : shards) {
    std::sort(s.sample_indices.begin(), s.sample_indices.end());
    for (auto i : s.sample_indices) ++s.label_histogram[train.samples[i].category()];
  }
  check_shards(train, shards);
  return shards;
}

std::string samples_jsonl(const Dataset& ds) {
  std::string out;
  for (const auto& s : ds.samples) {
    nlohmann::json j{{"id", s.sample_id},
                     {"label", static_cast<int>(s.label)},
                     {"form", to_string(s.raw_form)},
                     {"tokens", s.tokens}};
    j["cwe"] = s.cwe ? nlohmann::json(*s.cwe) : nlohmann::json(nullptr);
    j["project"] = s.project ? nlohmann::json(*s.project) : nlohmann::json(nullptr);
    out += j.dump() + '\n';
  }
  return out;
}

Dataset parse_samples_jsonl(const std::string& text, const Vocab& vocab, const std::string& origin) {
  Dataset ds;
  ds.vocab = vocab;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      DatasetSample s;
      s.sample_id = j.at("id").get<std::string>();
      const int label = j.at("label").get<int>();
      if (label != 0 && label != 1) fail(ErrorKind::Schema, where + ": label must be 0 or 1");
      s.label = static_cast<Label>(label);
      s.raw_form = parse_raw_form(j.at("form").get<std::string>());
      s.tokens = j.at("tokens").get<std::vector<TokenId>>();
      if (s.tokens.empty()) fail(ErrorKind::Record, where + ": empty token sequence");
      for (auto t : s.tokens)
        if (t < 0 || static_cast<std::size_t>(t) >= vocab.size()) fail(ErrorKind::Record, where + ": token id out of range");
      if (!j.at("cwe").is_null()) s.cwe = j.at("cwe").get<std::string>();
      if (!j.at("project").is_null()) s.project = j.at("project").get<std::string>();
      ds.samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Record, where + ": " + e.what());
    }
  }
  ds.recount();
  return ds;
}

}  // namespace fedvuln
