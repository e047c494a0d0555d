#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "fpmforge/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Fourier ptychography preprocessing and reconstruction"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  fpmforge::app::CommandOptions opts;
  std::string out;
  std::uint64_t seed = 0;
  std::vector<std::string> datasets;

  app.add_option("--config", opts.config, "run configuration (JSON)");
  app.add_option("--dataset", datasets, "dataset directory (report: run directories)");
  auto* out_opt = app.add_option("--out", out, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");
  app.add_flag("--skip-uniformity", opts.skip_uniformity, "skip the dark-frame subtraction");
  app.add_flag("--no-preprocess", opts.no_preprocess, "reconstruct from normalized raw images");

  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "write a synthetic dataset"},
      {"preprocess", "write processed/ and preprocess_report.json"},
      {"reconstruct", "run EPRY on a dataset"},
      {"pipeline", "preprocess, then reconstruct"},
      {"sweep-threshold", "reconstruct once per sweep.values threshold"},
      {"report", "tabulate run_summary.json files"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    if (std::string(name) == "report") sub->add_option("runs", datasets, "run directories");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  for (const auto& d : datasets) opts.datasets.emplace_back(d);
  if (*out_opt) opts.out = out;
  if (*seed_opt) opts.seed = seed;
  const std::string command = app.get_subcommands().front()->get_name();
  return fpmforge::app::run_command(command, opts, std::cerr);
}
