// Command-line front end: closed-loop runs, strategy comparison, dataset
// generation and error-bound checks.
//
// Exit codes: 0 success, 1 configuration error, 2 numerical abort.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pmsm_gp/pmsm_gp.hpp"

namespace fs = std::filesystem;
using namespace pmsm_gp;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string strategy;
  std::string out;
  std::string out_dir;
};

ScenarioConfig load(const Options& opt) {
  ScenarioConfig cfg = load_scenario(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw ConfigError("cannot write " + p.string());
  return os;
}

int cmd_run(const Options& opt) {
  ScenarioConfig cfg = load(opt);
  if (!opt.strategy.empty()) {
    auto s = parse_strategy(opt.strategy);
    if (!s) throw ConfigError("unknown strategy '" + opt.strategy + "'");
    cfg.strategy = *s;
  }
  const auto log = run_closed_loop(cfg);
  auto os = open_out(opt.out);
  write_log_csv(os, log);
  const auto m = compute_metrics(log);
  std::cout << to_string(cfg.strategy) << ": rmse_e=" << m.rmse_e << " max_e=" << m.max_e
            << " steady_e=" << m.steady_e << " bound_violations=" << m.bound_violations << '\n';
  return 0;
}

int cmd_compare(const Options& opt) {
  const ScenarioConfig cfg = load(opt);
  const auto entries = compare(cfg);
  const fs::path dir(opt.out_dir);
  fs::create_directories(dir);
  auto summary = open_out(dir / "summary.csv");
  summary << "strategy,rmse_e,max_e,steady_e,bound_violations,error\n";
  summary << std::setprecision(10);
  bool numerical_failure = false;
  for (const auto& e : entries) {
    const std::string name(to_string(e.strategy));
    if (e.metrics) {
      auto os = open_out(dir / (name + ".csv"));
      write_log_csv(os, *e.log);
      summary << name << ',' << e.metrics->rmse_e << ',' << e.metrics->max_e << ','
              << e.metrics->steady_e << ',' << e.metrics->bound_violations << ",\n";
      std::cout << std::left << std::setw(11) << name << " steady_e=" << e.metrics->steady_e
                << " rmse_e=" << e.metrics->rmse_e << " max_e=" << e.metrics->max_e << '\n';
    } else {
      numerical_failure = true;
      summary << name << ",,,,,\"" << e.error << "\"\n";
      std::cerr << name << ": " << e.error << '\n';
    }
  }
  return numerical_failure ? kExitNumerical : 0;
}

int cmd_datagen(const Options& opt) {
  const ScenarioConfig cfg = load(opt);
  const auto datasets = ExpertBank::generate_datasets(cfg);
  const fs::path dir(opt.out_dir);
  fs::create_directories(dir);
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const auto p = dir / ("expert_" + std::to_string(i + 1) + ".csv");
    auto os = open_out(p);
    write_dataset_csv(os, datasets[i]);
    std::cout << p.string() << ": " << datasets[i].size() << " samples, noise_std="
              << datasets[i].noise_std << '\n';
  }
  return 0;
}

int cmd_bound_check(const Options& opt) {
  const ScenarioConfig cfg = load(opt);
  write_bound_report(std::cout, bound_check(cfg, ExpertBank::build(cfg)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed-GP learning-based PMSM tracking control simulator"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Scenario TOML file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "Override the scenario seed");
  };
  auto* run = app.add_subcommand("run", "Run one closed-loop simulation and write its CSV log");
  add_common(run);
  run->add_option("--strategy", opt.strategy, "none | moe | gpoe | coaoe-mean | coaoe-eta");
  run->add_option("--out", opt.out, "Output CSV")->required();

  auto* cmp = app.add_subcommand("compare", "Run every strategy and write logs plus summary.csv");
  add_common(cmp);
  cmp->add_option("--out-dir", opt.out_dir, "Output directory")->required();

  auto* gen = app.add_subcommand("datagen", "Write the expert training datasets as CSV");
  add_common(gen);
  gen->add_option("--out-dir", opt.out_dir, "Output directory")->required();

  auto* chk = app.add_subcommand("bound-check", "Report error-bound coverage and the ultimate bound");
  add_common(chk);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(opt);
    if (*cmp) return cmd_compare(opt);
    if (*gen) return cmd_datagen(opt);
    if (*chk) return cmd_bound_check(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const FactorizationError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
