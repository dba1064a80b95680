#include "qgrad/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"qgrad: solver, continuation, Harnack property suites and bound certificates"};
  app.require_subcommand(1);
  app.set_version_flag("--version", qgrad::kVersion);

  std::string config_path, out;
  long long seed = -1;
  int threads = 0;
  bool verbose = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->add_option("--seed", seed, "random seed (overrides the config)")->check(CLI::NonNegativeNumber);
    sub->add_option("--threads", threads, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
    sub->add_flag("--verbose", verbose, "progress on stderr");
  };
  for (auto [name, help] : {std::pair{"solve", "solve at one lambda with multistart Newton"},
                            std::pair{"continue", "trace the solution branch and draw the bifurcation diagram"},
                            std::pair{"harnack", "run the Harnack-type property suites"},
                            std::pair{"certify", "certify an a priori bound on [lambda_lo, lambda_hi]"}})
    common(app.add_subcommand(name, help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qgrad::cli::kConfigError;
  }

  qgrad::cli::Context ctx;
  try {
    if (!config_path.empty()) ctx.cfg = qgrad::load_config(config_path);
  } catch (const qgrad::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return qgrad::cli::kConfigError;
  }
  if (!out.empty()) ctx.cfg.out = out;
  if (seed >= 0) ctx.cfg.seed = static_cast<std::uint64_t>(seed);
  if (threads > 0) ctx.cfg.threads = threads;
  ctx.verbose = verbose;
  return qgrad::cli::run(app.get_subcommands().front()->get_name(), ctx);
}
