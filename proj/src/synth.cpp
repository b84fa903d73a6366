#include "fedvuln/synth.hpp"

#include <array>
#include <random>

#include <json.hpp>

#include "fedvuln/errors.hpp"
#include "fedvuln/numkit.hpp"

namespace fedvuln {

namespace {

constexpr std::array<const char*, 29> kCategories = {
    "CWE-119", "CWE-20",  "CWE-125", "CWE-399", "CWE-476", "CWE-787", "CWE-190", "CWE-416", "CWE-200", "CWE-189",
    "CWE-362", "CWE-401", "CWE-264", "CWE-415", "CWE-400", "CWE-772", "CWE-835", "CWE-284", "CWE-703", "CWE-369",
    "CWE-310", "CWE-22",  "CWE-134", "CWE-79",  "CWE-295", "CWE-617", "CWE-909", "CWE-59",  "CWE-674"};

std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

}  // namespace

std::string synthetic_category(std::size_t i) {
  if (i >= kCategories.size()) fail(ErrorKind::Config, "synthetic category index out of range");
  return kCategories[i];
}

void SynthSpec::validate() const {
  if (n_samples == 0) fail(ErrorKind::Config, "synthetic.n_samples must be positive");
  if (!(vulnerable_fraction > 0.0 && vulnerable_fraction < 1.0))
    fail(ErrorKind::Config, "synthetic.vulnerable_fraction must lie in (0, 1)");
  if (n_categories == 0 || n_categories > kCategories.size())
    fail(ErrorKind::Config, "synthetic.n_categories must lie in [1, 29]");
  if (motifs_per_category == 0 || motifs_per_sample == 0 || motif_repeats == 0)
    fail(ErrorKind::Config, "synthetic motif counts must be positive");
  for (double r : {cue_rate_vulnerable, cue_rate_secure})
    if (!(r >= 0.0 && r <= 1.0)) fail(ErrorKind::Config, "synthetic cue rates must lie in [0, 1]");
  if (n_filler == 0 || n_projects == 0) fail(ErrorKind::Config, "synthetic.n_filler and n_projects must be positive");
  if (min_tokens == 0 || min_tokens > max_tokens)
    fail(ErrorKind::Config, "synthetic lengths need 0 < min_tokens <= max_tokens");
}

std::string generate_synthetic_jsonl(const SynthSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0x5717));
  std::bernoulli_distribution vulnerable(spec.vulnerable_fraction);
  std::uniform_int_distribution<std::size_t> length(spec.min_tokens, spec.max_tokens);

  std::string out;
  for (std::size_t n = 0; n < spec.n_samples; ++n) {
    const bool vuln = vulnerable(rng);
    std::vector<std::string> body;
    const std::size_t len = length(rng);
    for (std::size_t t = 0; t < len; ++t) body.push_back("v" + std::to_string(pick(rng, spec.n_filler)));

    // Secure samples receive the same number of ordinary call tokens, so the
    // callee name is the only thing that separates the classes.
    nlohmann::json rec;
    const std::size_t cat = vuln ? pick(rng, spec.n_categories) : 0;
    for (std::size_t m = 0; m < spec.motifs_per_sample; ++m) {
      const std::string callee =
          vuln ? "sink_" + std::to_string(cat) + "_" + std::to_string(pick(rng, spec.motifs_per_category))
               : "v" + std::to_string(pick(rng, spec.n_filler));
      for (std::size_t r = 0; r < spec.motif_repeats; ++r)
        body.insert(body.begin() + static_cast<std::ptrdiff_t>(pick(rng, body.size() + 1)), callee);
    }
    if (std::bernoulli_distribution(vuln ? spec.cue_rate_vulnerable : spec.cue_rate_secure)(rng))
      body.insert(body.begin() + static_cast<std::ptrdiff_t>(pick(rng, body.size() + 1)), "cue");
    if (vuln) rec["cwe"] = kCategories[cat];

    std::string code;
    for (const auto& tok : body) code += (code.empty() ? "" : " ") + tok;
    rec["code"] = code;
    rec["label"] = vuln ? 1 : 0;
    rec["project"] = "proj" + std::to_string(pick(rng, spec.n_projects));
    out += rec.dump() + '\n';
  }
  return out;
}

}  // namespace fedvuln
