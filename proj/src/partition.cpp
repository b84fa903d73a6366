#include "fedvuln/partition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "fedvuln/errors.hpp"
#include "fedvuln/numkit.hpp"

namespace fedvuln {

void PartitionSpec::validate() const {
  if (n_clients < 2) fail(ErrorKind::Config, "partition needs at least 2 clients");
  if (mode == PartitionMode::Dirichlet && !(alpha > 0.0 && std::isfinite(alpha)))
    fail(ErrorKind::Config, "dirichlet alpha must be a positive finite number");
}

namespace {

std::map<std::string, std::vector<std::size_t>> group_by_category(const Dataset& train) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < train.samples.size(); ++i) groups[train.samples[i].category()].push_back(i);
  return groups;
}

std::vector<ClientShard> finish(const Dataset& train, std::vector<std::vector<std::size_t>> members) {
  std::vector<ClientShard> shards(members.size());
  for (std::size_t k = 0; k < members.size(); ++k) {
    shards[k].client_id = k;
    std::sort(members[k].begin(), members[k].end());
    shards[k].sample_indices = std::move(members[k]);
    for (auto i : shards[k].sample_indices) ++shards[k].label_histogram[train.samples[i].category()];
  }
  return shards;
}

}  // namespace

std::vector<ClientShard> partition_iid(const Dataset& train, const PartitionSpec& spec) {
  spec.validate();
  if (spec.n_clients > train.size())
    fail(ErrorKind::Partition, "cannot split " + std::to_string(train.size()) + " samples over " +
                                   std::to_string(spec.n_clients) + " clients");
  Rng rng(spec.seed);
  std::vector<std::vector<std::size_t>> members(spec.n_clients);
  // The round-robin cursor carries over between categories so that overall
  // shard sizes stay within one of each other.
  std::size_t cursor = 0;
  for (auto& [category, idx] : group_by_category(train)) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (auto i : idx) {
      members[cursor].push_back(i);
      cursor = (cursor + 1) % spec.n_clients;
    }
  }
  return finish(train, std::move(members));
}

std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> counts(weights.size(), 0);
  if (weights.empty()) return counts;
  if (!(sum > 0.0)) {
    counts[0] = total;
    return counts;
  }
  std::vector<double> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double exact = static_cast<double>(total) * weights[k] / sum;
    counts[k] = std::min(total, static_cast<std::size_t>(std::floor(exact)));
    remainder[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  // Floating error can push the floors over the total; trim from the smallest remainders.
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
  for (std::size_t j = 0; assigned < total; j = (j + 1) % order.size()) {
    ++counts[order[j]];
    ++assigned;
  }
  for (auto it = order.rbegin(); assigned > total; ) {
    if (counts[*it] > 0) {
      --counts[*it];
      --assigned;
    }
    if (++it == order.rend()) it = order.rbegin();
  }
  return counts;
}

std::vector<ClientShard> partition_dirichlet(const Dataset& train, const PartitionSpec& spec) {
  spec.validate();
  if (spec.n_clients > train.size())
    fail(ErrorKind::Partition, "cannot split " + std::to_string(train.size()) + " samples over " +
                                   std::to_string(spec.n_clients) + " clients");
  Rng rng(spec.seed);
  std::gamma_distribution<double> gamma(spec.alpha, 1.0);
  std::vector<std::vector<std::size_t>> members(spec.n_clients);

  for (auto& [category, idx] : group_by_category(train)) {
    std::vector<double> p(spec.n_clients);
    for (auto& x : p) x = gamma(rng);
    // Tiny alpha can underflow every draw; treat that as a uniform draw.
    if (!(std::accumulate(p.begin(), p.end(), 0.0) > 0.0)) std::fill(p.begin(), p.end(), 1.0);
    const auto counts = largest_remainder(idx.size(), p);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < spec.n_clients; ++k) {
      members[k].insert(members[k].end(), idx.begin() + static_cast<std::ptrdiff_t>(offset),
                        idx.begin() + static_cast<std::ptrdiff_t>(offset + counts[k]));
      offset += counts[k];
    }
  }

  // Repair: each empty shard takes the lowest sample from the currently largest
  // shard (ties to the lowest client id).
  for (std::size_t k = 0; k < spec.n_clients; ++k) {
    if (!members[k].empty()) continue;
    std::size_t donor = 0;
    for (std::size_t j = 1; j < spec.n_clients; ++j)
      if (members[j].size() > members[donor].size()) donor = j;
    auto lowest = std::min_element(members[donor].begin(), members[donor].end());
    members[k].push_back(*lowest);
    members[donor].erase(lowest);
  }
  return finish(train, std::move(members));
}

std::vector<ClientShard> partition(const Dataset& train, const PartitionSpec& spec) {
  return spec.mode == PartitionMode::Iid ? partition_iid(train, spec) : partition_dirichlet(train, spec);
}

double mean_chi_square(const Dataset& train, const std::vector<ClientShard>& shards) {
  const auto global = histogram_of(train.samples);
  const double n = static_cast<double>(train.size());
  double total = 0.0;
  for (const auto& shard : shards) {
    const double m = static_cast<double>(shard.size());
    double chi = 0.0;
    for (const auto& [category, count] : global) {
      const double pg = static_cast<double>(count) / n;
      auto it = shard.label_histogram.find(category);
      const double pc = it == shard.label_histogram.end() ? 0.0 : static_cast<double>(it->second) / m;
      chi += (pc - pg) * (pc - pg) / pg;
    }
    total += chi;
  }
  return total / static_cast<double>(shards.size());
}

double max_label_skew(const Dataset& train, const std::vector<ClientShard>& shards) {
  const auto global = histogram_of(train.samples);
  double skew = 0.0;
  for (const auto& [category, _] : global) {
    double lo = 1.0, hi = 0.0;
    for (const auto& shard : shards) {
      auto it = shard.label_histogram.find(category);
      const double share = it == shard.label_histogram.end()
                               ? 0.0
                               : static_cast<double>(it->second) / static_cast<double>(shard.size());
      lo = std::min(lo, share);
      hi = std::max(hi, share);
    }
    skew = std::max(skew, hi - lo);
  }
  return skew;
}

void check_shards(const Dataset& train, const std::vector<ClientShard>& shards) {
  std::vector<char> seen(train.size(), 0);
  std::size_t covered = 0;
  for (const auto& shard : shards) {
    if (shard.sample_indices.empty())
      fail(ErrorKind::Partition, "client " + std::to_string(shard.client_id) + " has an empty shard");
    for (auto i : shard.sample_indices) {
      if (i >= train.size()) fail(ErrorKind::Partition, "shard references sample outside the training set");
      if (seen[i]) fail(ErrorKind::Partition, "sample " + train.samples[i].sample_id + " assigned twice");
      seen[i] = 1;
      ++covered;
    }
  }
  if (covered != train.size()) fail(ErrorKind::Partition, "shards do not cover the training set");
}

}  // namespace fedvuln
