#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedvuln/corpus.hpp"

namespace fedvuln {

enum class PartitionMode { Iid, Dirichlet };

struct PartitionSpec {
  std::size_t n_clients = 10;
  PartitionMode mode = PartitionMode::Iid;
  double alpha = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ClientShard {
  std::size_t client_id = 0;
  std::vector<std::size_t> sample_indices;  // positions in the training Dataset, ascending
  CategoryHistogram label_histogram;

  std::size_t size() const { return sample_indices.size(); }
};

std::vector<ClientShard> partition_iid(const Dataset& train, const PartitionSpec& spec);
std::vector<ClientShard> partition_dirichlet(const Dataset& train, const PartitionSpec& spec);
std::vector<ClientShard> partition(const Dataset& train, const PartitionSpec& spec);

/// Exact integer apportionment of `total` by `weights` (largest remainder,
/// ties to the lower index). Counts sum to total.
std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& weights);

/// Mean over clients of sum_c (p_client(c) - p_global(c))^2 / p_global(c).
double mean_chi_square(const Dataset& train, const std::vector<ClientShard>& shards);

/// Largest gap, over clients, between the highest and lowest category share.
double max_label_skew(const Dataset& train, const std::vector<ClientShard>& shards);

/// Checks disjointness, exact cover, and non-emptiness; throws PartitionError.
void check_shards(const Dataset& train, const std::vector<ClientShard>& shards);

}  // namespace fedvuln
