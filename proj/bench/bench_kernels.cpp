// Serial reference kernel versus the chunked OpenMP kernel for one
// loss-and-gradient evaluation of the reference classifier.

#include <random>

#include <benchmark/benchmark.h>
#include <omp.h>

#include "fedvuln/peft.hpp"
#include "fedvuln/refmodel.hpp"

namespace {

using namespace fedvuln;

struct Fixture {
  ParamSet params;
  Batch batch;
};

Fixture make_fixture(std::size_t batch_size, SchemeKind kind) {
  ModelConfig mc;
  mc.vocab_size = 2000;
  mc.embed_dim = 32;
  mc.hidden_dim = 64;
  mc.n_blocks = 2;
  mc.max_len = 64;
  mc.seed = 7;
  SchemeSpec spec;
  spec.kind = kind;
  Fixture f{attach(spec, init(mc)), {}};
  Rng rng(11);
  std::uniform_int_distribution<TokenId> tok(2, static_cast<TokenId>(mc.vocab_size - 1));
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::vector<TokenId> seq(64);
    for (auto& t : seq) t = tok(rng);
    f.batch.tokens.push_back(std::move(seq));
    f.batch.labels.push_back(static_cast<int>(i % 2));
  }
  return f;
}

void BM_Serial(benchmark::State& state) {
  const auto f = make_fixture(static_cast<std::size_t>(state.range(0)), SchemeKind::Full);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad_reference(f.params, f.batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_OpenMP(benchmark::State& state) {
  const auto f = make_fixture(static_cast<std::size_t>(state.range(0)), SchemeKind::Full);
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(f.params, f.batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.counters["threads"] = static_cast<double>(state.range(1));
}

void BM_OpenMPLora(benchmark::State& state) {
  const auto f = make_fixture(static_cast<std::size_t>(state.range(0)), SchemeKind::Lora);
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(f.params, f.batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void thread_args(benchmark::internal::Benchmark* b) {
  const int max_threads = omp_get_num_procs();
  for (int batch : {32, 128, 512})
    for (int t = 1; t <= max_threads; t *= 2) b->Args({batch, t});
}

}  // namespace

BENCHMARK(BM_Serial)->Arg(32)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_OpenMP)->Apply(thread_args)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_OpenMPLora)->Apply(thread_args)->Unit(benchmark::kMicrosecond)->UseRealTime();

BENCHMARK_MAIN();
