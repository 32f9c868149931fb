#include "aggflow/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Command {
  const char* name;
  const char* help;
  aggflow::ExperimentKind kind;
};

constexpr Command commands[] = {
    {"run", "single run at flow.amplitude", aggflow::ExperimentKind::run},
    {"sweep", "amplitude sweep and blowup/global bracket", aggflow::ExperimentKind::sweep_A},
    {"relax", "decay ratios of the linear problem", aggflow::ExperimentKind::relax},
    {"transport-bound", "transport growth against the flow norm", aggflow::ExperimentKind::transport_bound},
    {"lp-check", "Littlewood-Paley property suite", aggflow::ExperimentKind::lp_check},
    {"kernel-check", "interaction kernel property suite", aggflow::ExperimentKind::kernel_check},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pseudo-spectral aggregation-diffusion experiments"};
  app.require_subcommand(1, 1);

  std::string config;
  std::string out;
  std::optional<int> threads;
  bool quiet = false;

  app.add_subcommand("version", "print the version string");
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config, "experiment config file")->required();
    sub->add_option("--out", out, "output directory (overrides AGGFLOW_OUTPUT_DIR and the config)");
    sub->add_option("--threads", threads, "worker threads (overrides AGGFLOW_THREADS)");
    sub->add_flag("--quiet", quiet, "no progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto* sub = app.get_subcommands().front();
  if (sub->get_name() == "version") {
    std::cout << aggflow::version_string << "\n";
    return 0;
  }

  aggflow::ExperimentKind kind = aggflow::ExperimentKind::run;
  for (const auto& c : commands)
    if (sub->get_name() == c.name) kind = c.kind;

  aggflow::RunContext ctx;
  aggflow::ExperimentConfig cfg;
  try {
    cfg = aggflow::load_config(config, kind);
    ctx.output_dir = aggflow::resolve_output_dir(cfg, out.empty() ? std::nullopt : std::optional<std::filesystem::path>(out));
    ctx.threads = aggflow::resolve_threads(threads);
  } catch (const aggflow::ConfigError& e) {
    std::cerr << "aggflow: config error: " << e.what() << "\n";
    return 2;
  }
  if (!quiet) ctx.progress = [](const std::string& msg) { std::cerr << "aggflow: " << msg << "\n"; };

  try {
    const auto result = aggflow::run_experiment(cfg, ctx);
    for (const auto& p : result.artifacts) std::cout << p.string() << "\n";
    if (!result.checks_passed) {
      std::cerr << "aggflow: one or more checks failed\n";
      return 3;
    }
  } catch (const aggflow::ConfigError& e) {
    std::cerr << "aggflow: config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "aggflow: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
