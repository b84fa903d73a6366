#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedvuln/errors.hpp"
#include "fedvuln/fedcore.hpp"
#include "fedvuln/partition.hpp"

namespace fedvuln {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::FedAvg: return "fedavg";
    case Algorithm::FedProx: return "fedprox";
    case Algorithm::CluSamp: return "clusamp";
    case Algorithm::FedCross: return "fedcross";
    case Algorithm::Moon: return "moon";
    case Algorithm::FedMut: return "fedmut";
  }
  return "fedavg";
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "fedavg") return Algorithm::FedAvg;
  if (s == "fedprox") return Algorithm::FedProx;
  if (s == "clusamp") return Algorithm::CluSamp;
  if (s == "fedcross") return Algorithm::FedCross;
  if (s == "moon") return Algorithm::Moon;
  if (s == "fedmut") return Algorithm::FedMut;
  fail(ErrorKind::Config, "unknown algorithm '" + s + "'");
}

std::size_t FederationConfig::selected_count() const {
  const auto q = static_cast<std::size_t>(std::ceil(static_cast<double>(n_clients) * select_fraction - 1e-9));
  return std::clamp<std::size_t>(q, 1, n_clients);
}

std::size_t FederationConfig::cluster_count() const {
  if (params.n_clusters > 0) return params.n_clusters;
  return std::min<std::size_t>(selected_count(), 5);
}

void FederationConfig::validate() const {
  if (n_clients < 1) fail(ErrorKind::Config, "federation needs at least one client");
  if (!(select_fraction > 0.0 && select_fraction <= 1.0)) fail(ErrorKind::Config, "select_fraction must lie in (0, 1]");
  if (local_epochs < 1) fail(ErrorKind::Config, "local_epochs must be at least 1");
  if (batch_size < 1) fail(ErrorKind::Config, "batch_size must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail(ErrorKind::Config, "learning_rate must be >= 0");
  if (!(params.mu >= 0.0)) fail(ErrorKind::Config, "mu must be nonnegative");
  if (!(params.tau > 0.0)) fail(ErrorKind::Config, "tau must be positive");
  if (!(params.cross_alpha >= 0.0 && params.cross_alpha <= 1.0)) fail(ErrorKind::Config, "cross_alpha must lie in [0, 1]");
  if (algorithm == Algorithm::CluSamp && cluster_count() > selected_count())
    fail(ErrorKind::Config, "n_clusters exceeds the per-round selection count");
}

// ---- selection ------------------------------------------------------------------

std::vector<std::size_t> select_clients(std::size_t round_index, const FederationConfig& config) {
  Rng rng(derive_seed(config.seed, round_index, 0x5e1ec7));
  std::vector<std::size_t> ids(config.n_clients);
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(config.selected_count());
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace {
double sq_dist(const FlatVector& a, const FlatVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}
}  // namespace

std::vector<std::size_t> kmeans(const std::vector<FlatVector>& points, std::size_t k, std::size_t max_iter) {
  const std::size_t n = points.size();
  std::vector<std::size_t> assign(n, 0);
  if (n == 0 || k == 0) return assign;

  // Max-min seeding from point 0; identical points never open a new center.
  std::vector<FlatVector> centers{points[0]};
  while (centers.size() < k) {
    double best = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) nearest = std::min(nearest, sq_dist(points[i], c));
      if (nearest > best) {
        best = nearest;
        arg = i;
      }
    }
    if (best <= 0.0) break;
    centers.push_back(points[arg]);
  }

  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = sq_dist(points[i], centers[0]);
      for (std::size_t c = 1; c < centers.size(); ++c) {
        const double d = sq_dist(points[i], centers[c]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[i] != best) changed = true;
      assign[i] = best;
    }
    if (!changed) break;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      FlatVector sum(points[0].size(), 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (assign[i] == c) {
          for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += points[i][j];
          ++count;
        }
      if (count == 0) continue;
      for (auto& v : sum) v /= static_cast<double>(count);
      centers[c] = std::move(sum);
    }
  }
  return assign;
}

std::vector<std::size_t> clusamp_select(const std::vector<ClientProfile>& clients, std::size_t n_clusters,
                                        std::size_t quota, ClusterMode mode, Rng& rng) {
  if (clients.empty() || quota == 0) return {};
  quota = std::min(quota, clients.size());
  const bool similarity = mode == ClusterMode::Similarity &&
                          std::all_of(clients.begin(), clients.end(), [](const auto& c) { return c.last_update.has_value(); });

  std::vector<FlatVector> points;
  if (similarity) {
    for (const auto& c : clients) {
      FlatVector v = *c.last_update;
      const double nv = norm2(v);
      if (nv > 0.0)
        for (auto& x : v) x /= nv;
      points.push_back(std::move(v));
    }
  } else {
    std::size_t largest = 1;
    for (const auto& c : clients) largest = std::max(largest, c.n_samples);
    for (const auto& c : clients) points.push_back({static_cast<double>(c.n_samples) / static_cast<double>(largest)});
  }
  const auto assign = kmeans(points, std::max<std::size_t>(1, n_clusters));
  const std::size_t k = *std::max_element(assign.begin(), assign.end()) + 1;

  std::vector<std::vector<std::size_t>> members(k);
  std::vector<double> mass(k, 0.0);
  for (std::size_t i = 0; i < clients.size(); ++i) {
    members[assign[i]].push_back(i);
    mass[assign[i]] += static_cast<double>(std::max<std::size_t>(clients[i].n_samples, 1));
  }
  const double total_mass = std::accumulate(mass.begin(), mass.end(), 0.0);

  // Per-cluster quotas: floor of the proportional share plus a systematic
  // draw on the fractional parts, so each cluster's expected quota is exact.
  std::vector<std::size_t> take(k, 0);
  std::vector<double> frac(k, 0.0);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double share = static_cast<double>(quota) * mass[c] / total_mass;
    take[c] = static_cast<std::size_t>(std::floor(share + 1e-12));
    frac[c] = std::max(0.0, share - static_cast<double>(take[c]));
    assigned += take[c];
  }
  if (assigned < quota) {
    const std::size_t extra = quota - assigned;
    const double frac_sum = std::accumulate(frac.begin(), frac.end(), 0.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double pointer = u01(rng) * frac_sum / static_cast<double>(extra);
    const double step = frac_sum / static_cast<double>(extra);
    double cumulative = 0.0;
    std::size_t given = 0;
    for (std::size_t c = 0; c < k && given < extra; ++c) {
      cumulative += frac[c];
      while (given < extra && pointer < cumulative) {
        ++take[c];
        ++given;
        pointer += step;
      }
    }
    for (std::size_t c = 0; given < extra; c = (c + 1) % k) {  // rounding leftovers
      ++take[c];
      ++given;
    }
  }
  // Every nonempty cluster is represented when the quota allows it.
  if (quota >= k) {
    for (std::size_t c = 0; c < k; ++c) {
      if (take[c] > 0 || members[c].empty()) continue;
      const auto donor = static_cast<std::size_t>(std::max_element(take.begin(), take.end()) - take.begin());
      --take[donor];
      ++take[c];
    }
  }
  // Cap at cluster size and hand the overflow to clusters with room.
  std::size_t overflow = 0;
  for (std::size_t c = 0; c < k; ++c)
    if (take[c] > members[c].size()) {
      overflow += take[c] - members[c].size();
      take[c] = members[c].size();
    }
  for (std::size_t c = 0; overflow > 0; c = (c + 1) % k)
    if (take[c] < members[c].size()) {
      ++take[c];
      --overflow;
    }

  std::vector<std::size_t> selected;
  for (std::size_t c = 0; c < k; ++c) {
    auto m = members[c];
    std::shuffle(m.begin(), m.end(), rng);
    for (std::size_t j = 0; j < take[c]; ++j) selected.push_back(clients[m[j]].client_id);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

// ---- hooks -----------------------------------------------------------------------

TermValue fedprox_term(std::span<const double> w_hot, std::span<const double> w_global_hot, double mu) {
  if (w_hot.size() != w_global_hot.size()) fail(ErrorKind::Dimension, "fedprox_term length mismatch");
  TermValue t{0.0, FlatVector(w_hot.size(), 0.0)};
  double sq = 0.0;
  for (std::size_t i = 0; i < w_hot.size(); ++i) {
    const double diff = w_hot[i] - w_global_hot[i];
    sq += diff * diff;
    t.grad[i] = mu * diff;
  }
  t.loss = 0.5 * mu * sq;
  return t;
}

double ProximalHook::parameter_term(std::span<const double> hot, std::span<double> hot_grad) const {
  const auto t = fedprox_term(hot, global_, mu_);
  for (std::size_t i = 0; i < hot_grad.size(); ++i) hot_grad[i] += t.grad[i];
  return t.loss;
}

namespace {

// Cosine similarity that treats a zero vector as orthogonal to everything.
double safe_cos(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a), nb = norm2(b);
  if (!(na > 0.0) || !(nb > 0.0)) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

// d cos(z, y) / dz, accumulated with a coefficient.
void add_cos_grad(std::span<const double> z, std::span<const double> y, double coeff, std::span<double> out) {
  const double nz = norm2(z), ny = norm2(y);
  if (!(nz > 0.0) || !(ny > 0.0)) return;
  const double c = dot(z, y) / (nz * ny);
  for (std::size_t j = 0; j < z.size(); ++j) out[j] += coeff * (y[j] / (nz * ny) - c * z[j] / (nz * nz));
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

double moon_term(std::span<const double> z, std::span<const double> z_global, std::span<const double> z_prev,
                 double tau, double weight) {
  if (!(tau > 0.0)) fail(ErrorKind::Config, "moon tau must be positive");
  if (z_prev.empty()) return 0.0;
  // -log(e^a / (e^a + e^b)) = softplus(b - a)
  return weight * softplus((safe_cos(z, z_prev) - safe_cos(z, z_global)) / tau);
}

FlatVector moon_term_grad(std::span<const double> z, std::span<const double> z_global,
                          std::span<const double> z_prev, double tau, double weight) {
  if (!(tau > 0.0)) fail(ErrorKind::Config, "moon tau must be positive");
  FlatVector g(z.size(), 0.0);
  if (z_prev.empty()) return g;
  const double s = sigmoid((safe_cos(z, z_prev) - safe_cos(z, z_global)) / tau);
  add_cos_grad(z, z_global, -weight * s / tau, g);
  add_cos_grad(z, z_prev, weight * s / tau, g);
  return g;
}

ContrastiveHook::ContrastiveHook(ParamSet global, std::optional<ParamSet> previous, double tau, double weight)
    : global_(std::move(global)), previous_(std::move(previous)), tau_(tau), weight_(weight) {
  if (!(tau > 0.0)) fail(ErrorKind::Config, "moon tau must be positive");
}

double ContrastiveHook::representation_term(const Batch& batch, const Matrix& reps, Matrix& rep_grad) const {
  // No previous local model yet: the term is zero.
  if (!previous_) return 0.0;
  const Matrix zg = forward(global_, batch).representation;
  const Matrix zp = forward(*previous_, batch).representation;
  const double inv = 1.0 / static_cast<double>(reps.rows);
  double loss = 0.0;
  for (std::size_t i = 0; i < reps.rows; ++i) {
    loss += moon_term(reps.row(i), zg.row(i), zp.row(i), tau_, weight_);
    const auto g = moon_term_grad(reps.row(i), zg.row(i), zp.row(i), tau_, weight_);
    auto out = rep_grad.row(i);
    for (std::size_t j = 0; j < g.size(); ++j) out[j] += inv * g[j];
  }
  return loss * inv;
}

// ---- aggregation ----------------------------------------------------------------

FlatVector aggregate_fedavg(std::vector<RoundUpdate> updates) {
  std::sort(updates.begin(), updates.end(), [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  std::vector<WeightedVector> items;
  items.reserve(updates.size());
  for (const auto& u : updates) items.push_back({u.hot_params, static_cast<double>(u.n_samples)});
  return weighted_sum(items);
}

FedCrossResult fedcross_round(const std::vector<FlatVector>& trained, double cross_alpha) {
  if (trained.empty()) fail(ErrorKind::State, "fedcross needs a nonempty pool");
  const std::size_t k = trained.size();
  FedCrossResult out;
  out.pool.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t peer = i;
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      const double c = safe_cos(trained[i], trained[j]);
      if (c < lowest) {
        lowest = c;
        peer = j;
      }
    }
    FlatVector mixed(trained[i].size());
    for (std::size_t t = 0; t < mixed.size(); ++t)
      mixed[t] = cross_alpha * trained[i][t] + (1.0 - cross_alpha) * trained[peer][t];
    out.pool[i] = std::move(mixed);
  }
  std::vector<WeightedVector> items;
  for (const auto& v : out.pool) items.push_back({v, 1.0});
  out.global = weighted_sum(items);
  return out;
}

std::vector<double> sign_mask(std::size_t length, const std::vector<std::size_t>& segment_sizes, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  std::vector<double> mask(length);
  if (segment_sizes.empty()) {
    for (auto& m : mask) m = coin(rng) ? 1.0 : -1.0;
    return mask;
  }
  std::size_t pos = 0;
  for (auto n : segment_sizes) {
    const double sign = coin(rng) ? 1.0 : -1.0;
    for (std::size_t i = 0; i < n && pos < length; ++i) mask[pos++] = sign;
  }
  if (pos != length) fail(ErrorKind::Dimension, "segment sizes do not cover the hot vector");
  return mask;
}

std::vector<FlatVector> fedmut_mutate(const FlatVector& global_hot, const FlatVector& delta, std::size_t n_variants,
                                      double beta, const std::vector<std::size_t>& segment_sizes, Rng& rng) {
  if (delta.size() != global_hot.size()) fail(ErrorKind::Dimension, "fedmut delta length mismatch");
  std::vector<FlatVector> variants;
  variants.reserve(n_variants);
  for (std::size_t pair = 0; pair < n_variants / 2; ++pair) {
    const auto mask = sign_mask(global_hot.size(), segment_sizes, rng);
    FlatVector plus(global_hot.size()), minus(global_hot.size());
    for (std::size_t i = 0; i < global_hot.size(); ++i) {
      const double step = beta * mask[i] * delta[i];
      plus[i] = global_hot[i] + step;
      minus[i] = global_hot[i] - step;
    }
    variants.push_back(std::move(plus));
    variants.push_back(std::move(minus));
  }
  if (n_variants % 2 == 1) variants.push_back(global_hot);
  return variants;
}

std::vector<std::size_t> hot_segment_sizes(const ParamSet& params) {
  std::vector<std::size_t> sizes;
  for (const auto& s : params.segments)
    if (s.hot) sizes.push_back(s.value.size());
  return sizes;
}

}  // namespace fedvuln
