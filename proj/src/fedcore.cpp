#include "fedvuln/fedcore.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <numeric>

#include <omp.h>

#include "fedvuln/errors.hpp"
#include "fedvuln/peft.hpp"
#include "fedvuln/serialize.hpp"

namespace fedvuln {

Batch LabeledData::batch(std::span<const std::size_t> indices) const {
  Batch b;
  b.tokens.reserve(indices.size());
  b.labels.reserve(indices.size());
  for (auto i : indices) {
    b.tokens.push_back(tokens[i]);
    b.labels.push_back(labels[i]);
  }
  return b;
}

Batch LabeledData::all() const { return Batch{tokens, labels}; }

LabeledData labeled(const Dataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  return labeled(ds, idx);
}

LabeledData labeled(const Dataset& ds, const std::vector<std::size_t>& indices) {
  LabeledData out;
  for (auto i : indices) {
    const auto& s = ds.samples.at(i);
    if (s.tokens.empty()) fail(ErrorKind::Input, "sample " + s.sample_id + " is not encoded");
    out.tokens.push_back(s.tokens);
    out.labels.push_back(static_cast<int>(s.label));
    out.categories.push_back(s.category());
  }
  return out;
}

RoundUpdate local_train(std::size_t client_id, const LabeledData& data, const ParamSet& start,
                        const FederationConfig& config, const HookList& hooks, std::uint64_t stream_seed,
                        std::size_t epochs) {
  if (data.size() == 0) fail(ErrorKind::Input, "client " + std::to_string(client_id) + " has no data");
  ParamSet params = start;
  Rng rng(stream_seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  double epoch_loss = 0.0;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += config.batch_size) {
      const std::size_t end = std::min(order.size(), pos + config.batch_size);
      const Batch batch = data.batch(std::span<const std::size_t>(order).subspan(pos, end - pos));
      auto lg = loss_and_grad(params, batch, hooks);
      gradient_step(params, lg.grads, config.learning_rate);
      // Hook terms differ between algorithms; the trace reports the shared task loss.
      loss_sum += lg.data_loss;
      ++n_batches;
    }
    epoch_loss = loss_sum / static_cast<double>(n_batches);
    if (!std::isfinite(epoch_loss) || !all_finite(hot_vector(params)))
      fail(ErrorKind::Degenerate, "local training of client " + std::to_string(client_id) +
                                      " diverged (non-finite loss); lower the learning rate");
  }
  return RoundUpdate{client_id, hot_vector(params), data.size(), epoch_loss};
}

EvaluationReport evaluate_params(const ParamSet& params, const LabeledData& test) {
  if (test.size() == 0) return report_from_confusion({});
  const ParamSet eff = effective_params(params);
  return evaluate(predict(eff, test.all()), test.labels, test.categories);
}

namespace {

ParamSet with_hot(const ParamSet& shape, const FlatVector& hot) {
  ParamSet p = shape;
  set_hot_vector(p, hot);
  return p;
}

std::uint64_t client_stream(const FederationConfig& config, std::size_t client, std::size_t round) {
  return derive_seed(config.seed, client + 1, round + 1);
}

int worker_count(const FederationConfig& config) {
  return config.workers == 0 ? omp_get_max_threads() : static_cast<int>(config.workers);
}

}  // namespace

FederationResult run_federation(const FederationConfig& config, const ParamSet& initial,
                                const std::vector<LabeledData>& client_data, const LabeledData& test,
                                const RoundObserver& observer) {
  config.validate();
  if (client_data.size() != config.n_clients)
    fail(ErrorKind::Config, "federation expects " + std::to_string(config.n_clients) + " clients, got " +
                                std::to_string(client_data.size()) + " shards");
  for (std::size_t c = 0; c < client_data.size(); ++c)
    if (client_data[c].size() == 0) fail(ErrorKind::Config, "client " + std::to_string(c) + " has an empty shard");

  const auto& ap = config.params;
  const std::size_t quota = config.selected_count();
  const auto segment_sizes =
      ap.mutate_granularity == MaskGranularity::Segment ? hot_segment_sizes(initial) : std::vector<std::size_t>{};

  FederationResult result;
  RoundState& st = result.final_state;
  st.global = initial;
  const FlatVector initial_hot = hot_vector(initial);
  if (config.algorithm == Algorithm::FedCross) st.pool.assign(quota, initial_hot);
  if (config.algorithm == Algorithm::FedMut) st.variants.assign(quota, initial_hot);

  for (std::size_t round = 0; round < config.rounds; ++round) {
    st.round_index = round;
    std::vector<std::size_t> selected;
    if (config.algorithm == Algorithm::CluSamp) {
      std::vector<ClientProfile> profiles;
      for (std::size_t c = 0; c < config.n_clients; ++c) {
        ClientProfile prof{c, client_data[c].size(), std::nullopt};
        if (auto it = st.last_update.find(c); it != st.last_update.end()) prof.last_update = it->second;
        profiles.push_back(std::move(prof));
      }
      Rng rng(derive_seed(config.seed, round, 0xc1a5));
      selected = clusamp_select(profiles, config.cluster_count(), quota, ap.cluster_mode, rng);
    } else {
      selected = select_clients(round, config);
    }

    // Dispatch: the k-th selected client (ascending id) gets the k-th vector.
    const FlatVector global_hot = hot_vector(st.global);
    std::vector<FlatVector> dispatch(selected.size(), global_hot);
    if (config.algorithm == Algorithm::FedCross) dispatch = st.pool;
    if (config.algorithm == Algorithm::FedMut) dispatch = st.variants;
    if (dispatch.size() != selected.size()) fail(ErrorKind::State, "dispatch/selection size mismatch");

    std::vector<RoundUpdate> updates(selected.size());
    std::vector<std::exception_ptr> errors(selected.size());
    std::vector<std::size_t> uploaded(selected.size(), 0);
#pragma omp parallel for schedule(dynamic) num_threads(worker_count(config))
    for (std::size_t k = 0; k < selected.size(); ++k) {
      try {
        const std::size_t client = selected[k];
        const ParamSet start = with_hot(st.global, dispatch[k]);
        HookList hooks;
        if (config.algorithm == Algorithm::FedProx) hooks.push_back(std::make_shared<ProximalHook>(dispatch[k], ap.mu));
        if (config.algorithm == Algorithm::Moon) {
          std::optional<ParamSet> prev;
          if (auto it = st.previous_local.find(client); it != st.previous_local.end())
            prev = with_hot(st.global, it->second);
          hooks.push_back(std::make_shared<ContrastiveHook>(start, std::move(prev), ap.tau, ap.contrastive_weight));
        }
        const auto trained = local_train(client, client_data[client], start, config, hooks,
                                         client_stream(config, client, round), config.local_epochs);
        // Only the serialized hot segments reach the server.
        const auto wire = encode_update(trained);
        if (wire.size() != kUpdateHeaderBytes + sizeof(double) * start.hot_count())
          fail(ErrorKind::State, "update payload does not match the hot parameter count");
        updates[k] = decode_update(wire);
        uploaded[k] = wire.size();
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);

    FlatVector new_global;
    switch (config.algorithm) {
      case Algorithm::FedCross: {
        std::vector<FlatVector> trained;
        for (const auto& u : updates) trained.push_back(u.hot_params);
        auto fc = fedcross_round(trained, ap.cross_alpha);
        st.pool = std::move(fc.pool);
        new_global = std::move(fc.global);
        break;
      }
      default:
        new_global = aggregate_fedavg(updates);
    }

    for (std::size_t k = 0; k < updates.size(); ++k) {
      const auto& u = updates[k];
      if (config.algorithm == Algorithm::Moon) st.previous_local[u.client_id] = u.hot_params;
      if (config.algorithm == Algorithm::CluSamp) {
        FlatVector delta(u.hot_params.size());
        for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = u.hot_params[i] - dispatch[k][i];
        st.last_update[u.client_id] = std::move(delta);
      }
    }
    if (config.algorithm == Algorithm::FedMut) {
      FlatVector delta(new_global.size());
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = new_global[i] - global_hot[i];
      Rng rng(derive_seed(config.seed, round, 0xfed307));
      st.variants = fedmut_mutate(new_global, delta, quota, ap.mutate_beta, segment_sizes, rng);
      st.previous_global = global_hot;
    }
    set_hot_vector(st.global, new_global);

    RoundTrace tr;
    tr.round = round + 1;
    tr.algorithm = config.algorithm;
    tr.selected = selected;
    double loss = 0.0;
    for (const auto& u : updates) loss += u.train_loss;
    tr.mean_train_loss = loss / static_cast<double>(updates.size());
    tr.uploaded_bytes = std::accumulate(uploaded.begin(), uploaded.end(), std::size_t{0});
    tr.metrics = evaluate_params(st.global, test);
    st.round_index = round + 1;
    if (observer) observer(tr, st);
    result.trace.push_back(std::move(tr));
  }

  result.report = result.trace.empty() ? evaluate_params(st.global, test) : result.trace.back().metrics;
  return result;
}

EvaluationReport independent_baseline(std::size_t client_id, const LabeledData& shard, const ParamSet& initial,
                                      const FederationConfig& config, const LabeledData& test) {
  const std::size_t epochs = config.rounds * config.local_epochs;
  if (epochs == 0) return evaluate_params(initial, test);
  const auto update = local_train(client_id, shard, initial, config, {},
                                  derive_seed(config.seed, client_id + 1, 0xba5e11e), epochs);
  return evaluate_params(with_hot(initial, update.hot_params), test);
}

}  // namespace fedvuln
