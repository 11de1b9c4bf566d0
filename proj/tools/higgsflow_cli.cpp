// higgsflow <verb> [--config FILE] [--key value ...]
//
// Every config key is also a flag (--flow.dt 1e-3, --N 32, ...); flags
// override the file. The verb's JSON report goes to stdout.

#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "higgsflow/experiment.hpp"

using namespace higgsflow;

int main(int argc, char** argv) {
  CLI::App app{"Higgs bundle flows on flat tori"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> flags;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, CLI::App*> subs;
  const std::map<std::string, std::string> help{
      {"run", "flow a scenario or state and certify the result"},
      {"catalog", "list the shipped scenarios"},
      {"validate", "check a scenario or state"},
      {"sweep-rho", "rho-scaled extension metrics of a scenario's sub-bundle"},
      {"verify-filtration", "certify the quotients of a scenario's filtration and re-assemble"},
      {"flow-equivalence", "compare the metric flow with the pair flow"},
  };
  for (const auto& verb : command_verbs()) {
    CLI::App* sub = app.add_subcommand(verb, help.at(verb));
    subs[verb] = sub;
    if (verb == "catalog") continue;
    sub->add_option("--config", config_paths[verb], "flat key = value config file");
    for (const auto& key : ExperimentConfig::keys()) sub->add_option("--" + key, flags[verb][key]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const nlohmann::json rep{{"status", "error"}, {"reason", "usage"}, {"message", e.what()}};
    std::cout << rep.dump(2) << "\n";
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  }

  std::string verb;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) verb = name;

  ExperimentConfig cfg;
  try {
    if (!config_paths[verb].empty()) cfg = ExperimentConfig::load(config_paths[verb]);
    for (const auto& key : ExperimentConfig::keys())
      if (subs[verb]->get_option_no_throw("--" + key) && subs[verb]->count("--" + key) > 0)
        cfg.set(key, flags[verb][key]);
  } catch (const ConfigError& e) {
    nlohmann::json rep{{"status", "error"}, {"reason", "config"}, {"message", e.what()}};
    if (!e.key.empty()) rep["key"] = e.key;
    std::cout << rep.dump(2) << "\n";
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  }

  const CommandResult res = run_command(verb, cfg);
  std::cout << res.report.dump(2) << "\n";
  if (res.exit_code != kExitOk && res.report.contains("message"))
    std::cerr << verb << ": " << res.report["message"].get<std::string>() << "\n";
  return res.exit_code;
}
