#include "fedvuln/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedvuln/errors.hpp"
#include "fedvuln/numkit.hpp"

namespace fedvuln {

using nlohmann::json;

std::string to_string(RawForm form) {
  switch (form) {
    case RawForm::SourceCode: return "source-code";
    case RawForm::CodeGadget: return "code-gadget";
    case RawForm::Sevc: return "sevc";
  }
  return "source-code";
}

RawForm parse_raw_form(std::string_view s) {
  if (s == "source-code") return RawForm::SourceCode;
  if (s == "code-gadget") return RawForm::CodeGadget;
  if (s == "sevc") return RawForm::Sevc;
  fail(ErrorKind::Schema, "unknown raw form '" + std::string(s) + "'");
}

std::string DatasetSample::category() const {
  if (label == Label::Secure) return std::string(kSecureCategory);
  return cwe.value_or(std::string(kNoCweCategory));
}

Vocab::Vocab() : Vocab(std::vector<std::string>{"<pad>", "<unk>"}) {}

Vocab::Vocab(std::vector<std::string> tokens_by_id) : tokens_(std::move(tokens_by_id)) {
  if (tokens_.size() < 2) fail(ErrorKind::Schema, "vocabulary must contain PAD and UNK");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) fail(ErrorKind::Schema, "duplicate vocabulary token '" + tokens_[i] + "'");
  }
}

TokenId Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end() || it->second < 2) return kUnk;
  return it->second;
}

CategoryHistogram histogram_of(const std::vector<DatasetSample>& samples) {
  CategoryHistogram h;
  for (const auto& s : samples) ++h[s.category()];
  return h;
}

std::size_t Dataset::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [label](const auto& s) { return s.label == label; }));
}

void Dataset::recount() { label_histogram = histogram_of(samples); }

namespace {

Label parse_label(const json& v, const std::string& where) {
  if (v.is_number_integer() || v.is_number_unsigned()) {
    const auto x = v.get<std::int64_t>();
    if (x == 0) return Label::Secure;
    if (x == 1) return Label::Vulnerable;
  } else if (v.is_boolean()) {
    return v.get<bool>() ? Label::Vulnerable : Label::Secure;
  } else if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "0") return Label::Secure;
    if (s == "1") return Label::Vulnerable;
  }
  fail(ErrorKind::Schema, where + ": label must be 0 or 1, got " + v.dump());
}

std::optional<std::string> parse_cwe(const json& rec, const std::string& where) {
  auto it = rec.find("cwe");
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) {
    auto s = it->get<std::string>();
    if (s.empty()) return std::nullopt;
    return s;
  }
  // DiverseVul stores a list of CWE tags; the first one names the category.
  if (it->is_array()) {
    if (it->empty()) return std::nullopt;
    if (!it->front().is_string()) fail(ErrorKind::Schema, where + ": cwe list must hold strings");
    return it->front().get<std::string>();
  }
  fail(ErrorKind::Schema, where + ": cwe must be a string");
}

std::string format_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%08zu", index);
  return buf;
}

}  // namespace

Dataset parse_jsonl(std::string_view text, RawForm form, const std::string& origin) {
  Dataset ds;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const std::string where = origin + ":" + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Record, where + ": malformed record (" + e.what() + ")");
    }
    if (!rec.is_object()) fail(ErrorKind::Record, where + ": record is not an object");
    auto code = rec.find("code");
    if (code == rec.end() || !code->is_string()) fail(ErrorKind::Record, where + ": missing string field 'code'");
    auto label = rec.find("label");
    if (label == rec.end()) fail(ErrorKind::Record, where + ": missing field 'label'");

    DatasetSample s;
    s.sample_id = format_id(ds.samples.size());
    s.raw_form = form;
    s.label = parse_label(*label, where);
    s.token_text = tokenize(code->get_ref<const std::string&>());
    if (s.token_text.empty()) fail(ErrorKind::Record, where + ": code has no tokens");
    auto cwe = parse_cwe(rec, where);
    if (s.label == Label::Vulnerable) {
      s.cwe = cwe.value_or(std::string(kNoCweCategory));
    } else if (cwe && *cwe != kSecureCategory && *cwe != kNoCweCategory) {
      fail(ErrorKind::Schema, where + ": secure sample carries CWE tag '" + *cwe + "'");
    }
    if (auto p = rec.find("project"); p != rec.end() && p->is_string()) s.project = p->get<std::string>();
    ds.samples.push_back(std::move(s));
  }
  ds.recount();
  return ds;
}

Dataset load_jsonl(const std::filesystem::path& path, RawForm form) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_jsonl(buf.str(), form, path.string());
}

Vocab build_vocab(const Dataset& dataset, std::size_t max_size) {
  if (max_size < 3) fail(ErrorKind::Config, "vocabulary max_size must be at least 3");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& s : dataset.samples)
    for (const auto& t : s.token_text) ++freq[t];

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens{"<pad>", "<unk>"};
  for (const auto& [tok, _] : ranked) {
    if (tokens.size() >= max_size) break;
    if (tok == "<pad>" || tok == "<unk>") continue;
    tokens.push_back(tok);
  }
  return Vocab(std::move(tokens));
}

std::vector<TokenId> encode(const std::vector<std::string>& tokens, const Vocab& vocab, std::size_t max_len) {
  const std::size_t n = std::min(tokens.size(), max_len);
  std::vector<TokenId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.id(tokens[i]);
  return ids;
}

void encode_all(Dataset& dataset, std::size_t max_len) {
  for (auto& s : dataset.samples) s.tokens = encode(s.token_text, dataset.vocab, max_len);
}

Dataset clean_min_count(const Dataset& dataset, std::size_t min_count) {
  const auto hist = histogram_of(dataset.samples);
  Dataset out;
  out.vocab = dataset.vocab;
  for (const auto& s : dataset.samples) {
    if (s.label == Label::Secure || hist.at(s.category()) >= min_count) out.samples.push_back(s);
  }
  out.recount();
  return out;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(ErrorKind::Config, "train_fraction must lie in (0, 1)");
  std::map<std::string, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) by_category[dataset.samples[i].category()].push_back(i);

  Rng rng(seed);
  std::vector<char> to_train(dataset.samples.size(), 0);
  for (auto& [category, idx] : by_category) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(idx.size()) * train_fraction + 1e-9));
    for (std::size_t k = 0; k < n_train; ++k) to_train[idx[k]] = 1;
  }

  Dataset train, test;
  train.vocab = test.vocab = dataset.vocab;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i)
    (to_train[i] ? train : test).samples.push_back(dataset.samples[i]);
  train.recount();
  test.recount();
  return {std::move(train), std::move(test)};
}

}  // namespace fedvuln
