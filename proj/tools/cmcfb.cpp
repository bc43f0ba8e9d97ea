#include <CLI11.hpp>

#include <iostream>
#include <regex>

#include "cmcfb/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Free-boundary CMC disk laboratory"};
  app.require_subcommand(1);

  cmc::cli::Options opt;
  std::string config;
  std::string grid;
  std::uint64_t seed = 0;

  for (const std::string& name : cmc::cli::command_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--grid", grid, "grid override n_rxn_theta");
    sub->add_option("--seed", seed, "seed override");
    sub->add_option("--format", opt.format, "report format")->check(CLI::IsMember({"json", "csv"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cmc::cli::kInputError;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (!config.empty()) opt.config_path = config;
  if (sub->count("--seed")) opt.seed = seed;
  if (!grid.empty()) {
    std::smatch m;
    static const std::regex re(R"((\d+)x(\d+))");
    if (!std::regex_match(grid, m, re) || m[1].length() > 6 || m[2].length() > 6) {
      std::cerr << "input error: --grid expects <n_r>x<n_theta>\n";
      return cmc::cli::kInputError;
    }
    opt.grid = std::make_pair(std::stoi(m[1]), std::stoi(m[2]));
  }
  return cmc::cli::run_command(sub->get_name(), opt);
}
