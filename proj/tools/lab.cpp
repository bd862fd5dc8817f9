// lab <scenario> --config <file> [--out <dir>] [--seed <n>] [--jobs <n>] [--svg]
//
// Exit codes: 0 every verdict passed, 1 a verdict failed, 2 usage, config or
// module error.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "vdlab/lab.hpp"

int main(int argc, char** argv) {
  using namespace vdlab;
  CLI::App app{"Variable-density Euler energy laboratory"};
  std::string scenario_name, config_path, out_dir;
  long long seed = -1;
  int jobs = 1;
  bool svg = false;
  std::string names;
  for (const auto& [s, n] : lab::scenario_names()) names += names.empty() ? n : std::string(", ") + n;
  app.add_option("scenario", scenario_name, "one of: " + names)->required();
  app.add_option("--config,-c", config_path, "flat key = value config file")->required();
  app.add_option("--out,-o", out_dir, "output directory (overrides LAB_OUT and output.dir)");
  app.add_option("--seed", seed, "seed override")->check(CLI::NonNegativeNumber);
  app.add_option("--jobs,-j", jobs, "worker threads for independent sweeps")->check(CLI::PositiveNumber);
  app.add_flag("--svg", svg, "also write static SVG plots");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto scenario = lab::parse_scenario(scenario_name);
    auto cfg = lab::Config::load(config_path);
    if (seed >= 0) cfg.set("seed", std::to_string(seed));
    lab::RunOptions opt;
    opt.out_dir = lab::resolve_out_dir(scenario, cfg, out_dir);
    opt.jobs = jobs;
    opt.svg = svg;
    const auto out = lab::run_scenario(scenario, cfg, opt);
    for (const auto& c : out.checks)
      std::cout << (is_failure(c.verdict) ? "FAIL " : "ok   ") << c.message() << '\n';
    if (!out.error.empty()) std::cerr << "error: " << out.error << '\n';
    std::cout << to_string(scenario) << ": " << out.summary["verdict"].get<std::string>() << " (" << opt.out_dir
              << "/summary.json)\n";
    return out.exit_code();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
