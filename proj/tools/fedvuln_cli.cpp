#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedvuln/commands.hpp"
#include "fedvuln/config.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed_override;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", c.out, "output directory (overrides output_dir)");
  cmd->add_option("--workers", c.workers, "worker threads for local training (0 = all cores)");
  cmd->add_option("--seed-override", c.seed_override, "replace every seed in the config");
}

fedvuln::ExperimentConfig load(const Common& c) {
  auto cfg = fedvuln::load_config(c.config);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.workers) cfg.federation.workers = *c.workers;
  if (c.seed_override) fedvuln::apply_seed_override(cfg, *c.seed_override);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated vulnerability-detection simulator"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "write the configured synthetic corpus as JSONL");
  auto* prepare = app.add_subcommand("prepare", "load, clean, split and partition the dataset");
  auto* run = app.add_subcommand("run", "run the federation on prepared data");
  auto* baseline = app.add_subcommand("baseline", "train every client in isolation");
  for (auto* cmd : {synth, prepare, run, baseline}) add_common(cmd, common, true);

  auto* compare = app.add_subcommand("compare", "per-category comparison of a federated and an independent report");
  std::string federated, independent;
  add_common(compare, common, false);
  compare->add_option("--federated", federated, "federated report.json or run directory");
  compare->add_option("--independent", independent, "independent report.json or baseline directory");

  auto* report = app.add_subcommand("report", "print a report");
  std::string report_dir;
  add_common(report, common, false);
  report->add_option("--run", report_dir, "report.json or run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? fedvuln::kExitOk : fedvuln::kExitValidation;
  }

  try {
    if (synth->parsed()) fedvuln::cmd_synth(load(common), std::cout);
    if (prepare->parsed()) fedvuln::cmd_prepare(load(common), std::cout);
    if (run->parsed()) fedvuln::cmd_run(load(common), std::cout);
    if (baseline->parsed()) fedvuln::cmd_baseline(load(common), std::cout);
    if (compare->parsed()) {
      // With --config, --out names the experiment directory as for every other
      // command; without it, --out is where the comparison goes.
      std::filesystem::path fl = federated, indep = independent, out = common.out;
      if (!common.config.empty()) {
        const auto cfg = load(common);
        if (fl.empty()) fl = cfg.output_dir / "run";
        if (indep.empty()) indep = cfg.output_dir / "baseline";
        out = cfg.output_dir / "compare";
      } else if (fl.empty() || indep.empty() || out.empty()) {
        std::cerr << "error: compare needs --config or all of --federated, --independent and --out\n";
        return fedvuln::kExitValidation;
      }
      fedvuln::cmd_compare(fl, indep, out, std::cout);
    }
    if (report->parsed()) {
      std::filesystem::path dir = report_dir;
      if (dir.empty()) {
        if (common.config.empty()) {
          std::cerr << "error: report needs --config or --run\n";
          return fedvuln::kExitValidation;
        }
        dir = load(common).output_dir / "run";
      }
      fedvuln::cmd_report(dir, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fedvuln::exit_code_for(e);
  }
  return fedvuln::kExitOk;
}
