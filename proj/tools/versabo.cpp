#include <CLI11.hpp>
#include <iostream>

#include "versabo/versabo.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"versabo: probabilistic-programming Bayesian optimization benchmarks"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a benchmark configuration");
  std::string config_path, out_dir, combine_rule;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  bool serial = false;
  run->add_option("--config", config_path, "JSON benchmark configuration")->required();
  run->add_option("--out", out_dir, "output directory for trace.csv and summary.csv")->required();
  run->add_option("--trials", trials, "override the number of trials");
  run->add_option("--seed", seed, "override the master seed");
  run->add_option("--combine-rule", combine_rule, "BPoE combine acceptance rule")
      ->check(CLI::IsMember({"standard", "as-printed"}));
  run->add_flag("--serial", serial, "run trials one at a time");

  app.add_subcommand("list-models", "print the available model ids");
  app.add_subcommand("list-systems", "print the available system ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (app.got_subcommand("list-models")) {
    for (const auto& id : versabo::model_ids()) std::cout << id << "\n";
    return kOk;
  }
  if (app.got_subcommand("list-systems")) {
    for (const auto& id : versabo::system_ids()) std::cout << id << "\n";
    return kOk;
  }

  versabo::BenchmarkConfig cfg;
  try {
    cfg = versabo::load_config(config_path);
    if (trials) {
      if (*trials < 1) throw versabo::ConfigError("--trials must be >= 1");
      cfg.trials = *trials;
    }
    if (seed) cfg.seed = versabo::Seed{*seed};
    if (!combine_rule.empty()) cfg.combine_rule = versabo::parse_combine_rule(combine_rule);
  } catch (const versabo::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    const auto res = versabo::run_benchmark(cfg, out_dir, versabo::BenchOptions{serial, 0});
    if (res.failures() > 0) {
      for (std::size_t c = 0; c < res.cells.size(); ++c) {
        for (std::size_t t = 0; t < res.cells[c].size(); ++t) {
          if (!res.cells[c][t].error.empty()) {
            std::cerr << "cell " << cfg.cells[c].id << " trial " << t << ": " << res.cells[c][t].error << "\n";
          }
        }
      }
      return kRuntimeError;
    }
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
