#include <CLI11.hpp>

#include <iostream>

#include "vdwlab/scenarios.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vdwlab: dispersion-force numerical laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", ion_table;
  std::uint64_t seed = 0;
  int threads = 1;
  bool strict = false;

  CLI::App* run_cmd = app.add_subcommand("run", "run a scenario from a config file");
  run_cmd->add_option("config", config_path, "scenario config file")->required();
  run_cmd->add_flag("--strict", strict, "abort on the first failing check");
  run_cmd->add_option("--out", out_dir, "output directory for reports and csv artifacts");
  run_cmd->add_option("--seed", seed, "seed for all randomized solvers");
  run_cmd->add_option("--threads", threads, "worker threads for independent sweep points");
  run_cmd->add_option("--ion-table", ion_table, "ionization table csv (property_e scenario)");

  CLI::App* list_cmd = app.add_subcommand("list", "list scenarios with default configs");

  CLI11_PARSE(app, argc, argv);

  if (list_cmd->parsed()) {
    for (const auto& s : vdwlab::list_scenarios()) {
      std::cout << s.name << ": " << s.description << "\n";
      std::cout << "  --- default config ---\n";
      std::istringstream in(s.default_config);
      std::string line;
      while (std::getline(in, line)) std::cout << "  " << line << "\n";
    }
    return 0;
  }

  try {
    vdwlab::ScenarioConfig cfg = vdwlab::load_config(config_path);
    vdwlab::RunOptions opt;
    opt.out_dir = out_dir;
    opt.seed = seed;
    opt.threads = threads;
    opt.strict = strict;
    opt.ion_table_path = ion_table;
    vdwlab::RunReport rep = vdwlab::run(cfg, opt);
    for (const auto& c : rep.checks) {
      std::cout << (c.passed ? "PASS " : "FAIL ") << rep.scenario << "." << c.name
                << "  measured=" << c.measured << " " << c.comparison
                << " threshold=" << c.threshold;
      if (!c.detail.empty()) std::cout << "  (" << c.detail << ")";
      std::cout << "\n";
      if (strict && !c.passed) {
        std::cerr << "strict mode: aborting on first failure\n";
        return 1;
      }
    }
    std::cout << (rep.all_passed() ? "all checks passed" : "some checks failed") << " in "
              << rep.elapsed_seconds << " s\n";
    return rep.all_passed() ? 0 : 1;
  } catch (const vdwlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 3;
  }
}
