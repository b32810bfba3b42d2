#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "protofair/commands.hpp"
#include "protofair/common.hpp"
#include "protofair/run_config.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, CliArgs& args) {
  sub->add_option("--config", args.config_path, "run config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--set", args.sets,
                  "override a config value, e.g. --set train.learning_rate=0.01");
  // Shorthands for the most common overrides.
  sub->add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t v) { args.sets.push_back("seed=" + std::to_string(v)); },
      "override the top-level seed");
  sub->add_option_function<std::string>(
      "--out-dir", [&](std::string v) { args.sets.push_back("out_dir=" + v); },
      "override the artifact directory");
  sub->add_option_function<int>(
      "--threads", [&](int v) { args.sets.push_back("threads=" + std::to_string(v)); },
      "worker threads for evaluation");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prototype-based recommender with group-fairness controls"};
  app.require_subcommand(1);
  CliArgs args;

  CLI::App* prepare = app.add_subcommand("prepare", "filter, group and split a dataset");
  CLI::App* synth = app.add_subcommand("synth", "generate a skewed synthetic dataset");
  CLI::App* train = app.add_subcommand("train", "train the configured variants");
  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate checkpoints and compare");
  CLI::App* explain = app.add_subcommand("explain", "prototype explanations and projection");
  for (CLI::App* sub : {prepare, synth, train, evaluate, explain}) add_common(sub, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const protofair::RunConfig cfg = protofair::load_run_config(args.config_path, args.sets);
    if (prepare->parsed()) protofair::cmd_prepare(cfg, std::cout);
    if (synth->parsed()) protofair::cmd_synth(cfg, std::cout);
    if (train->parsed()) protofair::cmd_train(cfg, std::cout);
    if (evaluate->parsed()) protofair::cmd_evaluate(cfg, std::cout);
    if (explain->parsed()) protofair::cmd_explain(cfg, std::cout);
  } catch (const protofair::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const protofair::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const protofair::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
