#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedvuln/corpus.hpp"
#include "fedvuln/metrics.hpp"
#include "fedvuln/partition.hpp"
#include "fedvuln/refmodel.hpp"

namespace fedvuln {

enum class Algorithm { FedAvg, FedProx, CluSamp, FedCross, Moon, FedMut };
enum class ClusterMode { Similarity, Size };
enum class MaskGranularity { Segment, Parameter };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& s);

struct AlgorithmParams {
  double mu = 0.01;                  // fedprox
  double tau = 0.5;                  // moon
  double contrastive_weight = 1.0;   // moon
  std::size_t n_clusters = 0;        // clusamp; 0 means min(selected, 5)
  ClusterMode cluster_mode = ClusterMode::Similarity;
  double cross_alpha = 0.9;          // fedcross
  double mutate_beta = 1.0;          // fedmut
  MaskGranularity mutate_granularity = MaskGranularity::Segment;
};

struct FederationConfig {
  std::size_t n_clients = 10;
  std::size_t rounds = 50;
  double select_fraction = 0.5;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  Algorithm algorithm = Algorithm::FedAvg;
  AlgorithmParams params;
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // 0 = all available cores

  std::size_t selected_count() const;
  std::size_t cluster_count() const;
  void validate() const;
};

/// Encoded samples with labels and categories, ready for batching.
struct LabeledData {
  std::vector<std::vector<TokenId>> tokens;
  std::vector<int> labels;
  std::vector<std::string> categories;

  std::size_t size() const { return tokens.size(); }
  Batch batch(std::span<const std::size_t> indices) const;
  Batch all() const;
};

LabeledData labeled(const Dataset& ds);
LabeledData labeled(const Dataset& ds, const std::vector<std::size_t>& indices);

struct RoundUpdate {
  std::size_t client_id = 0;
  FlatVector hot_params;
  std::size_t n_samples = 0;
  double train_loss = 0.0;
};

// ---- client selection -------------------------------------------------------

/// ceil(n_clients * fraction) distinct ids, sorted; seeded by (seed, round).
std::vector<std::size_t> select_clients(std::size_t round_index, const FederationConfig& config);

struct ClientProfile {
  std::size_t client_id = 0;
  std::size_t n_samples = 0;
  std::optional<FlatVector> last_update;
};

/// Groups rows into at most k clusters with Lloyd iterations from a max-min
/// seeding; returns a cluster index per row.
std::vector<std::size_t> kmeans(const std::vector<FlatVector>& points, std::size_t k, std::size_t max_iter = 50);

/// Cluster-then-sample selection. Similarity mode clusters last-round updates
/// by cosine; it falls back to size mode until every client has an update.
std::vector<std::size_t> clusamp_select(const std::vector<ClientProfile>& clients, std::size_t n_clusters,
                                        std::size_t quota, ClusterMode mode, Rng& rng);

// ---- loss hooks ---------------------------------------------------------------

struct TermValue {
  double loss = 0.0;
  FlatVector grad;
};

/// (mu/2)||w - w_global||^2 and its gradient.
TermValue fedprox_term(std::span<const double> w_hot, std::span<const double> w_global_hot, double mu);

class ProximalHook final : public LossHook {
 public:
  ProximalHook(FlatVector global_hot, double mu) : global_(std::move(global_hot)), mu_(mu) {}
  double parameter_term(std::span<const double> hot, std::span<double> hot_grad) const override;

 private:
  FlatVector global_;
  double mu_;
};

/// Model-contrastive term for one sample:
///   -weight * log(e^{cos(z,zg)/tau} / (e^{cos(z,zg)/tau} + e^{cos(z,zp)/tau}))
double moon_term(std::span<const double> z, std::span<const double> z_global, std::span<const double> z_prev,
                 double tau, double weight);
/// Gradient of moon_term with respect to z.
FlatVector moon_term_grad(std::span<const double> z, std::span<const double> z_global,
                          std::span<const double> z_prev, double tau, double weight);

/// Batch-mean contrastive term; representations of the global and previous
/// local model are recomputed on each batch and treated as constants.
class ContrastiveHook final : public LossHook {
 public:
  ContrastiveHook(ParamSet global, std::optional<ParamSet> previous, double tau, double weight);
  double representation_term(const Batch& batch, const Matrix& reps, Matrix& rep_grad) const override;

 private:
  ParamSet global_;
  std::optional<ParamSet> previous_;
  double tau_;
  double weight_;
};

// ---- aggregation ----------------------------------------------------------------

/// Sample-weighted mean of the updates, accumulated in client_id order.
FlatVector aggregate_fedavg(std::vector<RoundUpdate> updates);

struct FedCrossResult {
  std::vector<FlatVector> pool;
  FlatVector global;
};

/// `trained[k]` is intermediate k after local training. Each one is mixed with
/// its least cosine-similar peer.
FedCrossResult fedcross_round(const std::vector<FlatVector>& trained, double cross_alpha);

/// Random +/-1 signs, one per segment (segment_sizes non-empty) or per entry.
std::vector<double> sign_mask(std::size_t length, const std::vector<std::size_t>& segment_sizes, Rng& rng);

/// Variants global +/- beta * (mask .* delta) in pairs; an odd count adds one
/// unmutated copy at the end.
std::vector<FlatVector> fedmut_mutate(const FlatVector& global_hot, const FlatVector& delta, std::size_t n_variants,
                                      double beta, const std::vector<std::size_t>& segment_sizes, Rng& rng);

/// Sizes of the hot segments, in canonical order.
std::vector<std::size_t> hot_segment_sizes(const ParamSet& params);

// ---- training and orchestration -------------------------------------------------

/// local_epochs passes of shuffled mini-batch gradient descent on hot parameters.
RoundUpdate local_train(std::size_t client_id, const LabeledData& data, const ParamSet& start,
                        const FederationConfig& config, const HookList& hooks, std::uint64_t stream_seed,
                        std::size_t epochs);

EvaluationReport evaluate_params(const ParamSet& params, const LabeledData& test);

struct RoundTrace {
  std::size_t round = 0;
  Algorithm algorithm = Algorithm::FedAvg;
  std::vector<std::size_t> selected;
  double mean_train_loss = 0.0;
  std::size_t uploaded_bytes = 0;
  EvaluationReport metrics;
};

struct RoundState {
  std::size_t round_index = 0;
  ParamSet global;
  std::vector<FlatVector> pool;                         // fedcross
  std::map<std::size_t, FlatVector> previous_local;     // moon
  std::optional<FlatVector> previous_global;            // fedmut
  std::vector<FlatVector> variants;                     // fedmut, dispatched next round
  std::map<std::size_t, FlatVector> last_update;        // clusamp (similarity mode)
};

using RoundObserver = std::function<void(const RoundTrace&, const RoundState&)>;

struct FederationResult {
  EvaluationReport report;
  std::vector<RoundTrace> trace;
  RoundState final_state;
};

/// `initial` must already carry the training scheme (see attach()).
FederationResult run_federation(const FederationConfig& config, const ParamSet& initial,
                                const std::vector<LabeledData>& client_data, const LabeledData& test,
                                const RoundObserver& observer = {});

/// Trains a fresh copy of `initial` on one shard alone for rounds * local_epochs
/// epochs and evaluates it on the shared test set.
EvaluationReport independent_baseline(std::size_t client_id, const LabeledData& shard, const ParamSet& initial,
                                      const FederationConfig& config, const LabeledData& test);

}  // namespace fedvuln
