// Command-line front end: one subcommand per experiment, results as CSV or JSON.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "blindmimo/harness/config.hpp"
#include "blindmimo/harness/experiments.hpp"
#include "blindmimo/harness/results.hpp"
#include "blindmimo/kernels.hpp"

namespace bh = blindmimo::harness;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCheck = 3;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::string out;
  std::string format = "csv";
  int threads = 0;
  bool check = false;
  bool large = false;
};

int run(bh::ExperimentKind kind, const Options& opt) {
  bh::ExperimentConfig cfg;
  try {
    cfg = opt.config_path.empty() ? bh::default_config(kind) : bh::load_config(opt.config_path, kind);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.trials) cfg.trials = *opt.trials;
    if (opt.large) cfg.allow_large = true;
    cfg.validate();
  } catch (const bh::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (opt.threads > 0) blindmimo::kernels::set_threads(opt.threads);

  const bh::ResultTable table = bh::run_experiment(cfg);
  const auto format = opt.format == "json" ? bh::OutputFormat::Json : bh::OutputFormat::Csv;
  if (opt.out.empty()) {
    if (format == bh::OutputFormat::Csv)
      bh::write_csv(table, std::cout);
    else
      std::cout << bh::table_to_json(table).dump(2) << '\n';
  } else {
    bh::emit_results(table, opt.out, format);
  }

  if (opt.check) {
    const auto violations = bh::check_table(cfg, table);
    for (const auto& v : violations) std::cerr << "check failed: " << v << '\n';
    if (!violations.empty()) return kExitCheck;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind massive-MIMO OFDM demodulation experiments"};
  app.require_subcommand(1);
  Options opt;

  const std::pair<const char*, bh::ExperimentKind> commands[] = {
      {"ber", bh::ExperimentKind::BerSweep},
      {"tap-error", bh::ExperimentKind::TapError},
      {"temporal", bh::ExperimentKind::Temporal},
      {"utilization", bh::ExperimentKind::Utilization},
  };
  for (const auto& [name, kind] : commands) {
    auto* sub = app.add_subcommand(name, "Run the " + bh::to_string(kind) + " experiment");
    sub->add_option("--config", opt.config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "Master seed (overrides the config)");
    sub->add_option("--trials", opt.trials, "Trials per point (overrides the config)");
    sub->add_option("--out", opt.out, "Output file (default: stdout)");
    sub->add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--threads", opt.threads, "OpenMP threads (default: runtime choice)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--check", opt.check, "Exit with code 3 when the experiment's expectations fail");
    sub->add_flag("--large", opt.large, "Allow FFT sizes above 1024");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    for (const auto& [name, kind] : commands)
      if (app.got_subcommand(name)) return run(kind, opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
