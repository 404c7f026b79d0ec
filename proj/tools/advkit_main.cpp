#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "advkit/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"advkit: adversarial robustness toolkit for tabular detectors"};
  app.require_subcommand(1);
  app.set_version_flag("--version", advkit::cli::kVersion);

  advkit::cli::RunOptions opt;
  std::uint64_t seed = 0;
  std::string out;
  const std::map<std::string, std::string> about = {
      {"train", "train the configured models"},
      {"attack", "attack trained models, optionally with adaptive attack weights"},
      {"defend", "run the configured adversarial-training defenses"},
      {"matrix", "attack x defense DSR matrix"},
      {"armsrace", "alternate adaptive attack and robust training"},
  };
  for (const auto& name : advkit::cli::command_names()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    sub->add_option("--config", opt.config_path, "experiment config (JSON) or a manifest to replay")
        ->required();
    sub->add_option("--seed", seed, "overrides config.seed");
    sub->add_option("--out", out, std::string("output root (default $") + advkit::cli::kOutEnv +
                                      " or ./advkit_out)");
    sub->add_option("--jobs", opt.jobs, "OpenMP threads (0: runtime default)");
  }
  CLI11_PARSE(app, argc, argv);

  auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opt.seed = seed;
  if (sub->count("--out")) opt.out = out;
  try {
    const auto root = advkit::cli::run(sub->get_name(), opt);
    std::cout << sub->get_name() << ": wrote " << root.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
