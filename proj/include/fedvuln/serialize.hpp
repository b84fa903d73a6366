#pragma once

// On-disk and on-wire formats. All binary layouts are little-endian.
//
// RoundUpdate ("FVRU", 40-byte header):
//   magic[4] | u32 version=1 | u64 client_id | u64 n_samples | f64 train_loss |
//   u64 count | f64 values[count]
//
// Checkpoint ("FVCK"):
//   magic[4] | u32 version=1 | u64 n_segments |
//   per segment: u64 name_len | name bytes | u64 rows | u64 cols | u8 hot | f64 values[rows*cols]
//   Segments appear in canonical flatten order.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedvuln/corpus.hpp"
#include "fedvuln/fedcore.hpp"
#include "fedvuln/metrics.hpp"
#include "fedvuln/params.hpp"
#include "fedvuln/partition.hpp"

namespace fedvuln {

inline constexpr std::size_t kUpdateHeaderBytes = 40;

std::vector<std::uint8_t> encode_update(const RoundUpdate& u);
RoundUpdate decode_update(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> encode_checkpoint(const ParamSet& p);
/// Restores values and hot mask into a ParamSet of the same layout.
ParamSet decode_checkpoint(const std::vector<std::uint8_t>& bytes, const ParamSet& shape_of);

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

nlohmann::json to_json(const EvaluationReport& r);
EvaluationReport report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RoundTrace& t);

/// One {"client_id", "sample_id"} record per line, clients in order.
std::string shards_jsonl(const Dataset& train, const std::vector<ClientShard>& shards);
std::vector<ClientShard> parse_shards_jsonl(const std::string& text, const Dataset& train);

/// Encoded samples: one {"id","label","cwe","project","form","tokens"} record per line.
std::string samples_jsonl(const Dataset& ds);
Dataset parse_samples_jsonl(const std::string& text, const Vocab& vocab, const std::string& origin);

}  // namespace fedvuln
