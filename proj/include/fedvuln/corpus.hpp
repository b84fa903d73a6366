#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fedvuln {

enum class RawForm { SourceCode, CodeGadget, Sevc };
enum class Label : int { Secure = 0, Vulnerable = 1 };

std::string to_string(RawForm form);
RawForm parse_raw_form(std::string_view s);

inline constexpr std::string_view kSecureCategory = "secure";
inline constexpr std::string_view kNoCweCategory = "CWE-None";

using TokenId = std::int32_t;

struct DatasetSample {
  std::string sample_id;
  std::vector<std::string> token_text;
  std::vector<TokenId> tokens;  // filled by encode(); empty before
  RawForm raw_form = RawForm::SourceCode;
  Label label = Label::Secure;
  std::optional<std::string> cwe;  // absent for secure samples
  std::optional<std::string> project;

  /// "secure" for secure samples, the CWE tag (or "CWE-None") otherwise.
  std::string category() const;
};

class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;

  Vocab();
  explicit Vocab(std::vector<std::string> tokens_by_id);

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

using CategoryHistogram = std::map<std::string, std::size_t>;

struct Dataset {
  std::vector<DatasetSample> samples;
  Vocab vocab;
  CategoryHistogram label_histogram;

  std::size_t size() const { return samples.size(); }
  std::size_t count(Label label) const;
  void recount();
};

CategoryHistogram histogram_of(const std::vector<DatasetSample>& samples);

/// C-like lexical split: identifiers, numbers, string/char literals, operators
/// (longest match), punctuation. Whitespace and comments are dropped.
std::vector<std::string> tokenize(std::string_view code);

/// Reads one JSON object per line with fields code, label, and optional cwe/project.
Dataset load_jsonl(const std::filesystem::path& path, RawForm form);
/// Parses already-read lines; `origin` is used in error messages.
Dataset parse_jsonl(std::string_view text, RawForm form, const std::string& origin = "<memory>");

Vocab build_vocab(const Dataset& dataset, std::size_t max_size);

/// Head-first truncation to max_len; out-of-vocabulary tokens map to UNK.
std::vector<TokenId> encode(const std::vector<std::string>& tokens, const Vocab& vocab, std::size_t max_len);
void encode_all(Dataset& dataset, std::size_t max_len);

Dataset clean_min_count(const Dataset& dataset, std::size_t min_count = 100);

std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, double train_fraction, std::uint64_t seed);

}  // namespace fedvuln
