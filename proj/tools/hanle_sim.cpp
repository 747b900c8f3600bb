#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <hanle/config.hpp>
#include <hanle/parallel.hpp>
#include <hanle/run.hpp>

int main(int argc, char** argv) {
  CLI::App app{"Hanle-configuration EIA/EIT resonance simulator"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir;
  int threads = 0;
  std::vector<std::string> overrides;
  std::string command;

  for (const char* name : {"scan-b", "sweep-eps", "find-epsmax", "solve-one"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "config file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--threads", threads, "worker threads (default: HANLE_SIM_THREADS, then all cores)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--override", overrides, "section.key=value, applied after the config file")
        ->allow_extra_args(false);
    sub->callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    hanle::RunConfig config = hanle::parse_config(config_path, overrides);
    if (!out_dir.empty()) config.output.dir = out_dir;
    const int workers = hanle::resolve_thread_count(threads);
    const hanle::RunResult result = hanle::run_command(hanle::parse_command(command), config, workers);
    for (const auto& f : result.files) std::cout << "wrote " << f.string() << "\n";
    std::cout << result.summary << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "hanle-sim " << command << ": error: " << e.what() << "\n";
    return hanle::exit_code_for(e);
  }
}
