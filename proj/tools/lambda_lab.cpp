// lambda-lab: command-line driver for the lambda-functional experiments.
//
//   lambda-lab lambda     --config cfg.json [--set grid.res=49 ...]
//   lambda-lab variations --config cfg.json
//   lambda-lab flow       --config cfg.json
//   lambda-lab scan       --config cfg.json
//   lambda-lab report     [args...]   (runs python3 -m lambda_lab_report)
//
// Exit codes: 0 success, 1 numerical failure, 2 configuration or usage error.

#include <iostream>

#include "CLI11.hpp"
#include "lambda_lab/cli.hpp"
#include "lambda_lab/error.hpp"

int main(int argc, char** argv) {
  using namespace lambda_lab;

  // the report passthrough forwards its arguments untouched
  if (argc >= 2 && std::string(argv[1]) == "report") return cli::report_passthrough({argv + 2, argv + argc});

  CLI::App app{"lambda-lab: Perelman's lambda on flat tori"};
  app.require_subcommand(1);
  std::string config;
  std::vector<std::string> overrides;
  std::string output;
  for (const char* name : {"lambda", "variations", "flow", "scan"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("-c,--config", config, "JSON experiment config");
    sub->add_option("-s,--set", overrides, "override a config key, e.g. grid.res=49")->take_all();
    sub->add_option("-o,--output", output, "output directory (overrides the config)");
  }
  app.add_subcommand("report", "render plots and tables (python3 -m lambda_lab_report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (!output.empty()) overrides.push_back("output=" + nlohmann::json(output).dump());
    const auto cfg = cli::load_config(config, overrides);
    return cli::run_command(command, cfg);
  } catch (const ConfigError& e) {
    std::cerr << "lambda-lab: " << e.what() << '\n';
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "lambda-lab: invalid input: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "lambda-lab: numerical failure: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "lambda-lab: " << e.what() << '\n';
    return 1;
  }
}
