// Command-line front end for the forecasting pipeline.
//
// Exit codes: 0 success, 2 invalid configuration or arguments, 3 runtime
// failure (including missing prerequisite artifacts).

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "iohfuse/cli/config.hpp"
#include "iohfuse/cli/pipeline.hpp"
#include "iohfuse/core/errors.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace iohfuse;
  CLI::App app{"Intraoperative hypotension forecasting pipeline"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir = "run";
  std::string ablation;
  std::uint64_t seed = 0;
  bool quiet = false;

  std::vector<std::string> commands = cli::command_names();
  commands.push_back("all");
  for (const auto& name : commands) {
    auto* sub = app.add_subcommand(name, name == "all" ? "run synth (when configured) through report" : "run the " + name + " stage");
    sub->add_option("-c,--config", config_path, "pipeline configuration (JSON)")->required();
    sub->add_option("--out-dir", out_dir, "run directory")->capture_default_str();
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--ablation", ablation, "full, no_text, no_vocab_ext, no_augmentation or no_pretrain");
    sub->add_flag("-q,--quiet", quiet, "suppress progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const auto* sub = app.get_subcommands().front();
  try {
    auto cfg = cli::load_pipeline_config(config_path);
    if (sub->count("--seed")) cfg.seed = seed;
    if (sub->count("--ablation")) {
      try {
        cfg.ablation = trainer::parse_ablation(ablation);
      } catch (const std::invalid_argument& e) {
        throw ValidationError({e.what()});
      }
    }
    cli::RunOptions opts;
    opts.out_dir = out_dir;
    opts.log = quiet ? nullptr : &std::cerr;
    if (command == "all") {
      std::vector<std::string> steps;
      if (cfg.dataset.source == "synth") steps.push_back("synth");
      for (const char* s : {"ingest", "prepare", "augment", "pretrain", "finetune", "evaluate", "report"}) steps.push_back(s);
      cli::run_pipeline(steps, cfg, opts);
    } else {
      cli::run_command(command, cfg, opts);
    }
  } catch (const ValidationError& e) {
    std::cerr << "invalid configuration:\n";
    for (const auto& v : e.violations()) std::cerr << "  - " << v << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
