#include "isdbandit/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace isdbandit;

namespace {

int run_and_export(ExperimentConfig cfg, const fs::path& out_dir, int threads, ExportFormat format) {
  const auto start = std::chrono::steady_clock::now();
  const GridResult result = run_grid(cfg, threads);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  fs::create_directories(out_dir);
  const fs::path path = out_dir / (cfg.experiment + (format == ExportFormat::csv ? ".csv" : ".json"));
  const auto rows = to_rows(cfg, result);
  export_rows(rows, path, format);

  std::printf("%s: %zu traces, %zu failures, %.1fs -> %s\n", cfg.experiment.c_str(),
              result.traces.size(), result.failures.size(), secs, path.string().c_str());
  const auto agg = aggregate(rows);
  for (const auto& pc : cfg.policies)
    for (const auto& [value, mean] : final_regret_curve(agg, pc.id))
      std::printf("  %-22s %s=%-6g final regret %.4g\n", pc.id.c_str(),
                  cfg.sweep.param.empty() ? "-" : cfg.sweep.param.c_str(), value, mean);
  for (const auto& f : result.failures)
    std::fprintf(stderr, "failed: policy %s sweep %g rep %d: %s\n", f.policy.c_str(), f.sweep_value,
                 f.repetition, f.message.c_str());
  return result.failures.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Invariant subspace decomposition bandit experiments"};
  app.require_subcommand(1);

  fs::path config_path;
  fs::path out_dir = "results";
  int reps = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  std::string format = "csv";
  std::string figure;

  auto* run = app.add_subcommand("run", "run the grid described by a JSON config");
  run->add_option("--config", config_path, "experiment config")->required()->check(CLI::ExistingFile);
  auto* reproduce = app.add_subcommand("reproduce", "run one of the built-in figure grids");
  reproduce->add_option("figure", figure, "fig2 | fig3 | fig4 | fig5 | hypercube")->required();

  for (auto* sub : {run, reproduce}) {
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--reps", reps, "override the repetition count")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "override the root seed")->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--threads", threads, "worker threads (default ISDBANDIT_THREADS or all cores)");
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  }

  CLI11_PARSE(app, argc, argv);

  ExperimentConfig cfg;
  try {
    cfg = run->parsed() ? load_config(config_path) : reproduce_config(figure);
    if (reps > 0) cfg.repetitions = reps;
    if (seed_set) cfg.root_seed = seed;
    cfg.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  }
  try {
    return run_and_export(cfg, out_dir, threads, format == "csv" ? ExportFormat::csv : ExportFormat::json);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
