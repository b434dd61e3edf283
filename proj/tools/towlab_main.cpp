#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "towlab/cli.hpp"
#include "towlab/common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Dynamic programming solvers, coupled-walk simulation, and "
               "regularity certificates for tug-of-war games with noise"};
  app.require_subcommand(1);

  towlab::cli::RunConfig rc;
  std::uint64_t seed = 0;
  bool seed_set = false;

  const std::vector<std::string> names = {"solve",        "simulate",  "couple",
                                          "verify-matrix", "verify-lemma", "expansion",
                                          "holder",       "certify"};
  for (const auto& name : names) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", rc.config_path, "JSON config file")->required();
    sub->add_option("--out", rc.out_dir, "output directory (default: out)");
    sub->add_option("--format", rc.format, "stdout format: json|csv");
    sub->add_option("--threads", rc.threads, "worker thread bound (default: 1)");
    sub->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
      seed_set = true;
    });
  }

  CLI11_PARSE(app, argc, argv);

  rc.subcommand = app.get_subcommands().front()->get_name();
  if (seed_set) rc.seed_override = seed;

  try {
    return towlab::cli::run(rc);
  } catch (const towlab::ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const towlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
