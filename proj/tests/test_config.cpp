#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fedvuln/config.hpp"
#include "fedvuln/errors.hpp"

using namespace fedvuln;
using nlohmann::json;

namespace {
ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::State;
}
}  // namespace

TEST_CASE("omitted keys take the documented defaults") {
  const auto c = parse_config(json::parse(R"({"dataset": {"synthetic": {}}})"));
  CHECK(c.corpus.max_len == 64);
  CHECK(c.corpus.min_count == 100);
  CHECK(c.partition.n_clients == 10);
  CHECK(c.federation.n_clients == 10);
  CHECK(c.federation.rounds == 50);
  CHECK(c.federation.select_fraction == 0.5);
  CHECK(c.federation.algorithm == Algorithm::FedAvg);
  CHECK(c.federation.params.mu == 0.01);
  CHECK(c.federation.params.tau == 0.5);
  CHECK(c.federation.params.cross_alpha == 0.9);
  CHECK(c.federation.params.mutate_beta == 1.0);
  CHECK(c.scheme.kind == SchemeKind::Full);
  CHECK(c.model.max_len == 64);
  CHECK(c.dataset.synthetic->n_samples == 4000);
  CHECK(c.output_dir == "runs/default");
  CHECK(kind_of([] { parse_config(json::object()); }) == ErrorKind::Config);
}

TEST_CASE("values are read and cross-linked") {
  const auto c = parse_config(json::parse(R"({
    "dataset": {"synthetic": {"n_samples": 500, "seed": 4}},
    "corpus": {"max_len": 32},
    "partition": {"n_clients": 6, "mode": "dirichlet", "alpha": 0.3},
    "scheme": {"kind": "lora", "rank": 2},
    "federation": {"algorithm": "clusamp", "algorithm_params": {"n_clusters": 2, "cluster_mode": "size"}}
  })"));
  CHECK(c.dataset.synthetic->n_samples == 500);
  CHECK(c.model.max_len == 32);
  CHECK(c.federation.n_clients == 6);
  CHECK(c.partition.mode == PartitionMode::Dirichlet);
  CHECK(c.scheme.kind == SchemeKind::Lora);
  CHECK(c.scheme.rank == 2);
  CHECK(c.federation.params.cluster_mode == ClusterMode::Size);
  // the canonical echo parses back to the same echo
  CHECK(to_json(parse_config(to_json(c))) == to_json(c));
}

TEST_CASE("unknown keys and wrong types are rejected") {
  CHECK(kind_of([] { parse_config(json::parse(R"({"federation": {"roundz": 3}})")); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_config(json::parse(R"({"extra": 1})")); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_config(json::parse(R"({"federation": {"rounds": "3"}})")); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_config(json::parse(R"({"federation": {"rounds": -1}})")); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_config(json::parse(R"({"federation": {"algorithm": "fedsgd"}})")); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_config(json::parse(R"({"federation": {"select_fraction": 1.5}})")); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_config(json::parse(R"({"partition": {"n_clients": 1}})")); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_config(json::parse(R"({"dataset": {"synthetic": {"n_categories": 40}}})")); }) ==
        ErrorKind::Config);
  CHECK(kind_of([] { parse_config(json::parse("[1, 2]")); }) == ErrorKind::Config);
}

TEST_CASE("seed override reaches every seed") {
  auto c = parse_config(json::parse(R"({"dataset": {"synthetic": {}}})"));
  apply_seed_override(c, 99);
  CHECK(c.dataset.synthetic->seed == 99);
  CHECK(c.corpus.seed == 99);
  CHECK(c.partition.seed == 99);
  CHECK(c.model.seed == 99);
  CHECK(c.scheme.seed == 99);
  CHECK(c.federation.seed == 99);
}

TEST_CASE("load_config resolves relative paths and reports file problems") {
  const auto dir = std::filesystem::temp_directory_path() / "fedvuln_config_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "good.json") << R"({"dataset": {"paths": ["data/a.jsonl"]}})";
    std::ofstream(dir / "broken.json") << "{ not json";
  }
  const auto c = load_config(dir / "good.json");
  REQUIRE(c.dataset.paths.size() == 1);
  CHECK(c.dataset.paths[0] == dir / "data/a.jsonl");
  CHECK(kind_of([&] { load_config(dir / "broken.json"); }) == ErrorKind::Config);
  CHECK(kind_of([&] { load_config(dir / "absent.json"); }) == ErrorKind::Io);
  std::filesystem::remove_all(dir);
}
