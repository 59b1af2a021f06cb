#include "pauc/commands.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
  CLI::App app{"DRO-based partial AUC maximization toolkit"};
  app.require_subcommand(1);

  pauc::CliOptions options;
  for (const std::string name : {"train", "eval", "re-curve", "sweep", "selftest"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", options.config_path, "key=value config file");
    sub->add_option("--seed", options.seed, "master seed (overrides the config)");
    sub->add_option("--out", options.out_dir, "output directory (overrides the config)");
    sub->add_option("--set", options.overrides, "per-field override key=value")
        ->take_all();
    sub->callback([&options, name]() { options.command = name; });
  }

  CLI11_PARSE(app, argc, argv);
  return pauc::run_command(options);
}
