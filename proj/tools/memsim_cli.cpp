// memsim command-line front end.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "memsim/config.hpp"
#include "memsim/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Memory-kernel master equation simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir = ".";
  int threads = 1;
  std::uint64_t seed = 0;

  for (const char* name :
       {"simulate", "oracle", "compare", "bound", "correlate", "decompose", "convergence"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " task");
    sub->add_option("--config", config_path, "JSON scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--output", output_dir, "output directory")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 256))->capture_default_str();
    sub->add_option("--seed", seed, "override the config seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  const auto task = memsim::parse_task(chosen->get_name());

  memsim::RunOptions options;
  options.output_dir = output_dir;
  options.threads = threads;
  if (chosen->count("--seed") > 0) options.seed = seed;

  memsim::RunConfig config;
  try {
    config = memsim::load_config(config_path);
  } catch (const memsim::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  }
  return memsim::run(*task, config, options, std::cout, std::cerr);
}
